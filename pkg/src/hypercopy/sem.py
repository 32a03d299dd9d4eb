"""Stochastic expectation-maximisation for the hyperedge copy model.

The latent variable of each edge is the earlier edge it was copied from.
Given parameters, the posterior over that source is available in closed
form over the (sparse) set of earlier edges sharing a node with it; its
expected sufficient statistics give the M-step directly.  SEM averages
those statistics over random mini-batches with a ``1/tau`` schedule.

Node ids are assumed to follow order of first appearance (the canonical
labelling produced by :func:`hypercopy.core.load_tsv` and the simulators),
so the nodes present before edge ``t`` are exactly ``0..nodes_before[t]-1``.
"""

from __future__ import annotations

import math
import time
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import TemporalHypergraph
from .gen import ModelParams


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def split_edge(e, f, n_prior: int) -> tuple[int, int, int]:
    """``(c, g, b)``: nodes of ``e`` shared with ``f``, extant outside ``f``, novel."""
    fs = set(f)
    c = sum(1 for v in e if v in fs)
    b = sum(1 for v in e if v >= n_prior)
    return c, len(e) - c - b, b


def log_edge_likelihood(c: int, j: int, g: int, b: int, n_prior: int, params: ModelParams,
                        with_beta: bool = True) -> float:
    """Log probability of producing an edge with overlap ``c`` from a size-``j`` source.

    ``g`` extant nodes outside the source and ``b`` novel nodes; ``n_prior``
    nodes existed before the step.
    """
    if c < 1 or c > j or g < 0 or b < 0:
        return -math.inf
    kbar = params.kbar
    if g > kbar or b > kbar or g > n_prior - j:
        return -math.inf
    eta = params.eta
    out = math.log(c / j)
    if c > 1:
        out += (c - 1) * _log(eta)
    if j > c:
        out += (j - c) * _log(1.0 - eta)
    out += _log(float(params.gamma[g])) - log_comb(n_prior - j, g)
    if with_beta:
        out += _log(float(params.beta[b]))
    return out


def edge_generation_likelihood(e, f, n_prior: int, params: ModelParams) -> float:
    """P(new edge = ``e`` | source = ``f``) for a hypergraph with ``n_prior`` nodes.

    ``e`` and ``f`` are iterables of node ids; ids ``>= n_prior`` in ``e``
    count as novel nodes.  Zero when ``e`` and ``f`` are disjoint.
    """
    e = tuple(e)
    f = tuple(f)
    c, g, b = split_edge(e, f, n_prior)
    return math.exp(log_edge_likelihood(c, len(f), g, b, n_prior, params))


# ----------------------------------------------------------------------
# posterior and sufficient statistics
# ----------------------------------------------------------------------


@dataclass
class Posterior:
    """Sparse posterior over source edges.

    ``sources`` are edge indices, ``probs`` their probabilities, ``overlap``
    the size of each source's intersection with the observed edge and
    ``sizes`` the source sizes.  ``novel`` is the number of novel nodes of
    the observed edge.  An empty posterior (no source with positive
    likelihood) is *null*.
    """

    sources: np.ndarray
    probs: np.ndarray
    overlap: np.ndarray
    sizes: np.ndarray
    edge_size: int
    novel: int
    log_evidence: float = -math.inf

    @property
    def is_null(self) -> bool:
        return self.sources.size == 0

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.sources.tolist(), self.probs.tolist()))


def _overlaps(h: TemporalHypergraph, e, upto: int, n_prior: int) -> Counter:
    """Earlier edges (index < upto) meeting ``e``, mapped to the overlap size."""
    met: Counter = Counter()
    inc = h.incidence
    for v in e:
        if v < n_prior:
            lst = inc[v]
            met.update(lst[: bisect_left(lst, upto)])
    return met


class _SizeCache:
    """Edge-size array of a hypergraph, built once."""

    def __init__(self):
        self._key = None
        self._sizes = None

    def get(self, h: TemporalHypergraph) -> np.ndarray:
        if self._key is not h:
            self._key = h
            self._sizes = np.fromiter((len(e) for e in h.edges), dtype=np.int64, count=h.m)
        return self._sizes


_sizes = _SizeCache()


def _log_weights(c: np.ndarray, j: np.ndarray, g: np.ndarray, n_prior: int,
                 params: ModelParams, gamma_floor: float = 0.0) -> np.ndarray:
    """Vectorised log likelihood without the (source independent) beta factor.

    ``gamma_floor`` lower-bounds the extant-count probabilities; zero keeps
    the exact likelihood.
    """
    kbar = params.kbar
    with np.errstate(divide="ignore", invalid="ignore"):
        log_eta = np.log(params.eta) if params.eta > 0 else -np.inf
        log_1m = np.log1p(-params.eta) if params.eta < 1 else -np.inf
        out = np.log(c / j)
        copied = c - 1
        out = out + np.where(copied > 0, copied * log_eta, 0.0)
        rest = j - c
        out = out + np.where(rest > 0, rest * log_1m, 0.0)
        ok = (g >= 0) & (g <= kbar) & (g <= n_prior - j)
        gi = np.clip(g, 0, kbar)
        lg = np.log(np.maximum(params.gamma[gi], gamma_floor))
        lc = np.array([log_comb(n_prior - jj, gg) if o else 0.0
                       for jj, gg, o in zip(j.tolist(), gi.tolist(), ok.tolist())])
        out = out + lg - lc
    out[~ok] = -np.inf
    return out


def source_log_likelihoods(e, h: TemporalHypergraph, upto: int, params: ModelParams,
                           n_prior: int | None = None, gamma_floor: float = 0.0):
    """Candidate sources of ``e`` among edges ``< upto`` with their log likelihoods.

    Returns ``(sources, overlap, sizes, loglik_without_beta, novel)``.
    """
    e = tuple(e)
    if n_prior is None:
        n_prior = int(h.nodes_before[min(upto, h.m)])
    met = _overlaps(h, e, upto, n_prior)
    novel = sum(1 for v in e if v >= n_prior)
    if not met:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, np.zeros(0), novel
    sources = np.fromiter(met.keys(), dtype=np.int64, count=len(met))
    order = np.argsort(sources)
    sources = sources[order]
    c = np.fromiter(met.values(), dtype=np.int64, count=len(met))[order]
    j = _sizes.get(h)[sources]
    g = len(e) - c - novel
    return sources, c, j, _log_weights(c, j, g, n_prior, params, gamma_floor), novel


def posterior_over_sources(e, h: TemporalHypergraph, upto: int, params: ModelParams,
                           gamma_floor: float = 0.0) -> Posterior:
    """Posterior over which edge ``< upto`` produced ``e``.

    ``e`` is treated as the edge added at index ``upto``; the nodes present
    at that time are those first seen before ``upto``.  The novel-count
    factor is common to all sources and is left out of the weights.
    """
    if upto < 1:
        raise ValueError("upto must be >= 1 (the first edge has no possible source)")
    e = tuple(sorted(e))
    sources, c, j, logw, novel = source_log_likelihoods(e, h, upto, params, gamma_floor=gamma_floor)
    empty = np.zeros(0, dtype=np.int64)
    if novel > params.kbar or sources.size == 0:
        return Posterior(empty, np.zeros(0), empty, empty, len(e), novel)
    keep = np.isfinite(logw)
    if not keep.any():
        return Posterior(empty, np.zeros(0), empty, empty, len(e), novel)
    sources, c, j, logw = sources[keep], c[keep], j[keep], logw[keep]
    top = logw.max()
    w = np.exp(logw - top)
    total = w.sum()
    n_edges = upto
    log_evidence = top + math.log(total) - math.log(n_edges) + _log(float(params.beta[novel]))
    return Posterior(sources, w / total, c, j, len(e), novel, log_evidence)


@dataclass
class SuffStats:
    """Expected sufficient statistics ``(s1, s2, s3, s4)``.

    ``s1`` expected overlap with the source, ``s2`` expected number of
    source nodes left out, ``s3[l]`` P(``l`` novel nodes), ``s4[l]`` P(``l``
    extant nodes from outside the source).
    """

    s1: float
    s2: float
    s3: np.ndarray
    s4: np.ndarray

    @classmethod
    def zeros(cls, kbar: int) -> "SuffStats":
        return cls(0.0, 0.0, np.zeros(kbar + 1), np.zeros(kbar + 1))

    def __add__(self, other):
        return SuffStats(self.s1 + other.s1, self.s2 + other.s2, self.s3 + other.s3,
                         self.s4 + other.s4)

    def scale(self, a: float) -> "SuffStats":
        return SuffStats(a * self.s1, a * self.s2, a * self.s3, a * self.s4)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.s1, self.s2], self.s3, self.s4])


def stats_from_posterior(post: Posterior, kbar: int) -> SuffStats:
    if post.is_null:
        raise ValueError("null posterior has no sufficient statistics")
    p = post.probs
    s1 = float(np.dot(p, post.overlap))
    s2 = float(np.dot(p, post.sizes - post.overlap))
    s3 = np.zeros(kbar + 1)
    s3[post.novel] = 1.0
    g = post.edge_size - post.overlap - post.novel
    s4 = np.bincount(g, weights=p, minlength=kbar + 1)[: kbar + 1]
    return SuffStats(s1, s2, s3, s4)


def expected_sufficient_stats(e, h: TemporalHypergraph, upto: int, params: ModelParams) -> SuffStats:
    """Sufficient statistics of ``e`` (added at index ``upto``) under the source posterior."""
    post = posterior_over_sources(e, h, upto, params)
    if post.is_null:
        raise ValueError("null posterior: no earlier edge can have produced this edge")
    return stats_from_posterior(post, params.kbar)


def m_step(stats: SuffStats) -> ModelParams:
    """Closed-form maximiser: ``eta = (s1-1)/(s1+s2-1)``, ``gamma = s4``, ``beta = s3``."""
    num = stats.s1 - 1.0
    den = stats.s1 + stats.s2 - 1.0
    if den <= 0 or num <= 0:
        eta = 0.0
    else:
        eta = min(1.0, num / den)
    gamma = np.clip(stats.s4, 0.0, None)
    beta = np.clip(stats.s3, 0.0, None)
    return ModelParams(eta, gamma / gamma.sum(), beta / beta.sum())


# ----------------------------------------------------------------------
# SEM driver
# ----------------------------------------------------------------------


@dataclass
class SemConfig:
    kbar: int
    batch_size: int = 30
    check_interval: int = 100
    rel_tol: float = 1e-2
    ordering: str = "temporal"
    max_steps: int = 100_000
    init: ModelParams | None = None
    # lower bound on gamma inside the E-step, so an extant count missing
    # from the early batches does not stay impossible for the whole run
    gamma_floor: float = 1e-10

    def __post_init__(self):
        if self.ordering not in ("temporal", "shuffled"):
            raise ValueError("ordering must be 'temporal' or 'shuffled'")
        if self.batch_size < 1 or self.check_interval < 1 or self.kbar < 0:
            raise ValueError("batch_size, check_interval must be >= 1 and kbar >= 0")

    @staticmethod
    def schedule(tau: int) -> float:
        return 1.0 / tau


@dataclass
class TraceRecord:
    tau: int
    eta: float
    gamma: np.ndarray
    beta: np.ndarray
    seconds: float


@dataclass
class FitTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    samples: int = 0
    skipped: int = 0
    exhausted: bool = False
    eta_path: list = field(default_factory=list)

    @property
    def skipped_fraction(self) -> float:
        total = self.samples + self.skipped
        return self.skipped / total if total else 0.0


def default_init(kbar: int) -> ModelParams:
    u = np.full(kbar + 1, 1.0 / (kbar + 1))
    return ModelParams(0.5, u, u)


def kl_divergence(p, q) -> float:
    """``sum p log(p/q)`` over the support of ``p`` (``inf`` if ``q`` misses it)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def pseudo_temporal(h: TemporalHypergraph, rng: np.random.Generator):
    """Randomly reorder the edges of ``h``; returns ``(reordered, order)``."""
    order = rng.permutation(h.m)
    return h.reordered(order.tolist()), order


def _is_canonical(h: TemporalHypergraph) -> bool:
    fs = h.first_seen
    return bool(np.all(fs[1:] >= fs[:-1])) if fs.size else True


def sem_fit(h: TemporalHypergraph, config: SemConfig, rng_seed: int = 0):
    """Fit ``(eta, gamma, beta)`` by stochastic EM.

    Each step draws ``batch_size`` distinct edges (never the first edge,
    which has no possible source), computes their expected sufficient
    statistics under the current estimate from strictly earlier edges,
    averages them and blends the average into the running statistics with
    weight ``1/tau``.  Every ``check_interval`` steps the mean ``eta`` of the
    last window is compared with the previous window; the fit stops when
    the relative change is below ``rel_tol``.

    With ``ordering='shuffled'`` the edges are first put in a random
    pseudo-temporal order and no edge is sampled twice; the run ends early
    if the edges run out.

    Returns ``(params, trace)``.
    """
    if h.m < 2:
        raise ValueError("need at least two edges")
    rng = np.random.default_rng(rng_seed)
    if config.ordering == "shuffled":
        h, _ = pseudo_temporal(h, rng)
    elif not _is_canonical(h):
        h = h.relabeled()
    kbar = config.kbar
    theta = config.init or default_init(kbar)
    if theta.kbar != kbar:
        raise ValueError("initial parameters must have length kbar + 1")
    pool = None
    if config.ordering == "shuffled":
        pool = (1 + rng.permutation(h.m - 1)).tolist()
    batch = min(config.batch_size, h.m - 1)
    s_hat = SuffStats.zeros(kbar)
    trace = FitTrace()
    start = time.perf_counter()
    edges = h.edges
    window = config.check_interval
    tau = 0
    while tau < config.max_steps:
        if pool is not None:
            if not pool:
                trace.exhausted = True
                break
            idxs, pool = pool[:batch], pool[batch:]
        else:
            idxs = (1 + rng.choice(h.m - 1, size=batch, replace=False)).tolist()
        acc = SuffStats.zeros(kbar)
        used = 0
        for t in idxs:
            post = posterior_over_sources(edges[t], h, t, theta, gamma_floor=config.gamma_floor)
            if post.is_null:
                trace.skipped += 1
                continue
            acc = acc + stats_from_posterior(post, kbar)
            used += 1
        if used == 0:
            continue
        trace.samples += used
        tau += 1
        s_bar = acc.scale(1.0 / used)
        rho = config.schedule(tau)
        s_hat = s_hat.scale(1.0 - rho) + s_bar.scale(rho)
        theta = m_step(s_hat)
        trace.eta_path.append(theta.eta)
        if tau % window == 0:
            trace.records.append(TraceRecord(tau, theta.eta, theta.gamma.copy(), theta.beta.copy(),
                                             time.perf_counter() - start))
            if tau >= 2 * window:
                cur = float(np.mean(trace.eta_path[-window:]))
                prev = float(np.mean(trace.eta_path[-2 * window:-window]))
                if prev == cur or (prev != 0 and abs(cur - prev) / abs(prev) < config.rel_tol):
                    trace.converged = True
                    break
    if tau and (not trace.records or trace.records[-1].tau != tau):
        trace.records.append(TraceRecord(tau, theta.eta, theta.gamma.copy(), theta.beta.copy(),
                                         time.perf_counter() - start))
    trace.steps = tau
    return theta, trace
