"""Forward simulation of the hyperedge copy model and two baselines.

Randomness
----------
Every simulation is driven by a :class:`RandomStreams` object built from a
single 64-bit seed.  The seed feeds ``numpy.random.SeedSequence`` which is
split into four independent PCG64 streams, one per kind of decision:

``select``  edge selection and seed-node choice
``copy``    one uniform per non-seed member of the source edge
``extant``  extant-node count and the extant nodes themselves
``novel``   novel-node count (and the Poisson draw of the baselines)

Within a step each stream is consumed in a fixed order, so a run is a pure
function of ``(params, steps, seed hypergraph, seed)``.  Keeping the streams
apart also means that, for example, changing ``eta`` leaves the sequence of
selected source edges untouched.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .core import TemporalHypergraph

_BUFFER = 1 << 14


def _as_prob_vector(x, name):
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} must have finite nonnegative entries")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (sums to {arr.sum():.12g})")
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Copy probability ``eta``, extant-count law ``gamma``, novel-count law ``beta``.

    ``gamma[i]`` (``beta[i]``) is the probability of adding ``i`` extant
    (novel) nodes.  The shorter vector is zero-padded so both are indexed
    ``0..kbar``.
    """

    eta: float
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        eta = float(self.eta)
        if not (0.0 <= eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        g = _as_prob_vector(self.gamma, "gamma")
        b = _as_prob_vector(self.beta, "beta")
        size = max(g.size, b.size)
        g = np.pad(g, (0, size - g.size))
        b = np.pad(b, (0, size - b.size))
        g.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def kbar(self) -> int:
        return self.gamma.size - 1

    @property
    def mu_gamma(self) -> float:
        return float(np.dot(np.arange(self.gamma.size), self.gamma))

    @property
    def mu_beta(self) -> float:
        return float(np.dot(np.arange(self.beta.size), self.beta))

    def to_dict(self) -> dict:
        return {"eta": self.eta, "gamma": self.gamma.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        missing = {"eta", "gamma", "beta"} - set(d)
        if missing:
            raise ValueError(f"params missing keys: {sorted(missing)}")
        if not isinstance(d["gamma"], list) or not isinstance(d["beta"], list):
            raise ValueError("gamma and beta must be JSON arrays")
        return cls(float(d["eta"]), d["gamma"], d["beta"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            self.eta == other.eta
            and np.array_equal(self.gamma, other.gamma)
            and np.array_equal(self.beta, other.beta)
        )

    def __hash__(self):
        return hash((self.eta, self.gamma.tobytes(), self.beta.tobytes()))


def truncated_poisson(mean: float, kmax: int) -> np.ndarray:
    """Poisson(mean) pmf on ``0..kmax`` renormalised to sum to one."""
    p = np.zeros(kmax + 1)
    if mean <= 0:
        p[0] = 1.0
        return p
    for k in range(kmax + 1):
        p[k] = math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))
    return p / p.sum()


# ----------------------------------------------------------------------
# random streams
# ----------------------------------------------------------------------


class UniformStream:
    """Buffered uniforms from one PCG64 generator."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._gen = np.random.Generator(np.random.PCG64(seed_seq))
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BUFFER).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        k = int(self.random() * n)
        return k if k < n else n - 1

    def choice_cdf(self, cdf: list[float]) -> int:
        k = bisect_right(cdf, self.random() * cdf[-1])
        return k if k < len(cdf) else len(cdf) - 1

    def poisson(self, mean: float, cap: int) -> tuple[int, bool]:
        """Inverse-CDF Poisson draw; returns ``(value, capped)``."""
        if mean <= 0:
            return 0, False
        u = self.random()
        p = math.exp(-mean)
        c = p
        k = 0
        while u > c and k < cap:
            k += 1
            p *= mean / k
            c += p
        return k, (k == cap and u > c)


class RandomStreams:
    """The four named streams derived from one 64-bit seed."""

    NAMES = ("select", "copy", "extant", "novel")

    def __init__(self, seed: int):
        seed = int(seed)
        if not (0 <= seed < 2**64):
            raise ValueError("rng seed must be an unsigned 64-bit integer")
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(len(self.NAMES))
        self.select, self.copy, self.extant, self.novel = (UniformStream(c) for c in children)


# ----------------------------------------------------------------------
# growth state
# ----------------------------------------------------------------------


def default_seed_hypergraph(kbar: int) -> TemporalHypergraph:
    """One edge holding ``ceil(kbar/2) + 1`` fresh nodes."""
    size = math.ceil(kbar / 2) + 1
    return TemporalHypergraph([tuple(range(size))])


@dataclass
class GrowthState:
    """Mutable hypergraph under construction plus its random streams."""

    edges: list
    n: int
    streams: RandomStreams
    clamped_extant: int = 0
    capped_poisson: int = 0
    # flat list of node memberships; only maintained for the PA model
    stubs: list | None = None
    novel_counts: list = field(default_factory=list)

    @classmethod
    def from_hypergraph(cls, h: TemporalHypergraph, rng_seed: int, track_stubs=False):
        if h.m == 0:
            raise ValueError("seed hypergraph must contain at least one edge")
        stubs = [v for e in h.edges for v in e] if track_stubs else None
        return cls(list(h.edges), h.n, RandomStreams(rng_seed), stubs=stubs)

    @property
    def m(self) -> int:
        return len(self.edges)

    def to_hypergraph(self) -> TemporalHypergraph:
        return TemporalHypergraph._trusted(self.edges, list(range(len(self.edges))))

    def _append(self, nodes, b: int):
        new = range(self.n, self.n + b)
        self.n += b
        edge = tuple(sorted(nodes)) + tuple(new)
        self.edges.append(edge)
        self.novel_counts.append(b)
        if self.stubs is not None:
            self.stubs.extend(edge)
        return edge


def _cdf(p: np.ndarray) -> list[float]:
    return np.cumsum(p).tolist()


def _sample_extant(stream: UniformStream, n: int, exclude: set, g: int) -> list[int]:
    """``g`` distinct ids from ``range(n)`` minus ``exclude`` (g already clamped)."""
    if g == 0:
        return []
    available = n - len(exclude)
    if available <= 2 * g or n < 64:
        pool = [v for v in range(n) if v not in exclude]
        out = []
        # partial Fisher-Yates
        for i in range(g):
            j = i + stream.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
            out.append(pool[i])
        return out
    chosen: list[int] = []
    taken = set(exclude)
    while len(chosen) < g:
        v = stream.below(n)
        if v not in taken:
            taken.add(v)
            chosen.append(v)
    return chosen


class _Tables:
    """Per-run cached CDFs so the inner loop avoids numpy calls."""

    def __init__(self, params: ModelParams):
        self.eta = params.eta
        self.gamma_cdf = _cdf(params.gamma)
        self.beta_cdf = _cdf(params.beta)
        self.beta = params.beta.tolist()


def hcm_step(state: GrowthState, params: ModelParams, _tables: _Tables | None = None) -> tuple:
    """Add one edge by noisy copying; returns the new edge (sorted tuple).

    1. pick a source edge ``f`` uniformly and a seed node ``v0`` uniformly in ``f``;
    2. keep every other member of ``f`` independently with probability ``eta``;
    3. draw ``g ~ gamma`` and add ``g`` distinct nodes chosen uniformly from
       the nodes outside ``f`` (clamped to what is available, counted in
       ``state.clamped_extant``);
    4. draw ``b ~ beta`` and add ``b`` brand-new nodes ``n, n+1, ...``.
    """
    tab = _tables or _Tables(params)
    s = state.streams
    edges = state.edges
    f = edges[s.select.below(len(edges))]
    seed_pos = s.select.below(len(f))
    eta = tab.eta
    copy = s.copy
    nodes = [f[seed_pos]]
    for i, v in enumerate(f):
        if i != seed_pos and copy.random() < eta:
            nodes.append(v)

    g = s.extant.choice_cdf(tab.gamma_cdf)
    available = state.n - len(f)
    if g > available:
        state.clamped_extant += 1
        g = available
    if g:
        nodes.extend(_sample_extant(s.extant, state.n, set(f), g))
    b = s.novel.choice_cdf(tab.beta_cdf)
    return state._append(nodes, b)


def _run(step, params, steps, seed_hg, rng_seed, track_stubs=False):
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if seed_hg is None:
        seed_hg = default_seed_hypergraph(params.kbar)
    state = GrowthState.from_hypergraph(seed_hg, rng_seed, track_stubs=track_stubs)
    tab = _Tables(params)
    for _ in range(steps):
        step(state, params, tab)
    return state


def simulate_hcm(
    params: ModelParams,
    steps: int,
    seed_hg: TemporalHypergraph | None = None,
    rng_seed: int = 0,
    return_state: bool = False,
):
    """Run ``steps`` HCM updates from ``seed_hg``.

    Timestamps of the result are edge indices (the seed edges come first).
    With ``return_state`` the final :class:`GrowthState` is returned as
    well, exposing the clamp diagnostics.
    """
    state = _run(hcm_step, params, steps, seed_hg, rng_seed)
    h = state.to_hypergraph()
    return (h, state) if return_state else h


# ----------------------------------------------------------------------
# baselines
# ----------------------------------------------------------------------


def _copy_count(state: GrowthState, tab: _Tables) -> int:
    """alpha = 1 + Binomial(|f|-1, eta) for a uniformly chosen edge f."""
    s = state.streams
    f = state.edges[s.select.below(len(state.edges))]
    s.select.below(len(f))  # seed position, drawn to keep stream usage aligned with HCM
    alpha = 1
    for _ in range(len(f) - 1):
        if s.copy.random() < tab.eta:
            alpha += 1
    return alpha


def _novel_poisson(state: GrowthState, tab: _Tables, params: ModelParams) -> int:
    s = state.streams
    b = s.novel.choice_cdf(tab.beta_cdf)
    cap = max(4 * params.kbar, 1)
    b_hat, capped = s.novel.poisson(float(b), cap)
    if capped:
        state.capped_poisson += 1
    return b_hat


def er_step(state: GrowthState, params: ModelParams, _tables: _Tables | None = None) -> tuple:
    """Erdos-Renyi-type step: ``alpha + g`` uniform extant nodes plus Poisson(b) new ones."""
    tab = _tables or _Tables(params)
    alpha = _copy_count(state, tab)
    g = state.streams.extant.choice_cdf(tab.gamma_cdf)
    want = alpha + g
    if want > state.n:
        state.clamped_extant += 1
        want = state.n
    nodes = _sample_extant(state.streams.extant, state.n, set(), want)
    return state._append(nodes, _novel_poisson(state, tab, params))


def degree_proportional_sample(stubs: list, k: int, stream: UniformStream, max_tries=None) -> list:
    """``k`` distinct nodes drawn with probability proportional to degree.

    Draws uniformly from the membership multiset ``stubs`` and rejects
    repeats.  ``k`` must not exceed the number of distinct nodes in ``stubs``.
    """
    chosen: list[int] = []
    seen: set[int] = set()
    tries = 0
    limit = max_tries if max_tries is not None else 1000 * (k + 1)
    total = len(stubs)
    while len(chosen) < k:
        v = stubs[stream.below(total)]
        tries += 1
        if v not in seen:
            seen.add(v)
            chosen.append(v)
        elif tries > limit:
            # heavy concentration on already chosen nodes: finish exactly
            return chosen + _weighted_without_replacement(stubs, k - len(chosen), seen, stream)
    return chosen


def _weighted_without_replacement(stubs, k, exclude, stream):
    counts: dict[int, int] = {}
    for v in stubs:
        if v not in exclude:
            counts[v] = counts.get(v, 0) + 1
    nodes = sorted(counts)
    weights = [counts[v] for v in nodes]
    out = []
    for _ in range(k):
        total = sum(weights)
        u = stream.random() * total
        acc = 0.0
        for idx, w in enumerate(weights):
            acc += w
            if u < acc:
                break
        out.append(nodes[idx])
        weights[idx] = 0
    return out


def pa_step(state: GrowthState, params: ModelParams, _tables: _Tables | None = None) -> tuple:
    """Preferential-attachment-type step.

    ``alpha`` degree-proportional nodes, then ``g`` uniform nodes outside
    that set, then Poisson(b) new nodes.  ``alpha`` is recomputed each step
    from a fresh uniformly chosen edge.
    """
    tab = _tables or _Tables(params)
    alpha = _copy_count(state, tab)
    s = state.streams
    if alpha > state.n:
        state.clamped_extant += 1
        alpha = state.n
    picked = degree_proportional_sample(state.stubs, alpha, s.extant)
    g = s.extant.choice_cdf(tab.gamma_cdf)
    available = state.n - len(picked)
    if g > available:
        state.clamped_extant += 1
        g = available
    extra = _sample_extant(s.extant, state.n, set(picked), g)
    return state._append(picked + extra, _novel_poisson(state, tab, params))


def simulate_er(params, steps, seed_hg=None, rng_seed=0, return_state=False):
    """Run ``steps`` Erdos-Renyi-type updates (see :func:`er_step`)."""
    state = _run(er_step, params, steps, seed_hg, rng_seed)
    h = state.to_hypergraph()
    return (h, state) if return_state else h


def simulate_pa(params, steps, seed_hg=None, rng_seed=0, return_state=False):
    """Run ``steps`` preferential-attachment-type updates (see :func:`pa_step`)."""
    state = _run(pa_step, params, steps, seed_hg, rng_seed, track_stubs=True)
    h = state.to_hypergraph()
    return (h, state) if return_state else h


SIMULATORS = {"hcm": simulate_hcm, "er": simulate_er, "pa": simulate_pa}
