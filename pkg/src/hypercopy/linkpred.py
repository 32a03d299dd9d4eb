"""Hyperedge link prediction with the copy model.

A candidate node set is scored by its marginal likelihood of being the next
edge of the training hypergraph, averaging the per-source likelihood over a
uniformly chosen source.  Negatives come either from a size- and
degree-matched sampler or by swapping out half of a positive's nodes.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import TemporalHypergraph
from .gen import ModelParams
from .sem import SemConfig, _overlaps, _SizeCache, log_comb, sem_fit

log = logging.getLogger(__name__)

#: score of a candidate that no training edge can produce
SENTINEL = -math.inf


class RejectionBudgetError(RuntimeError):
    """The matched sampler could not find a non-observed set."""


class SourceCapError(RuntimeError):
    """A candidate meets more training edges than the configured cap."""


@dataclass
class ScoredCandidate:
    nodes: tuple
    label: int
    log_score: float


_sizes = _SizeCache()


def candidate_score(e, h_train: TemporalHypergraph, params: ModelParams,
                    max_sources: int | None = None) -> float:
    """Log marginal likelihood that ``e`` is the next edge of ``h_train``.

    ``e`` uses the node ids of ``h_train``; ids ``>= h_train.n`` are nodes
    the training data has not seen and count as novel.  Returns
    :data:`SENTINEL` when no training edge shares a node with ``e``.
    """
    m = h_train.m
    if m == 0:
        raise ValueError("training hypergraph is empty")
    e = tuple(sorted(set(int(v) for v in e)))
    n = h_train.n
    met = _overlaps(h_train, e, m, n)
    if not met:
        return SENTINEL
    if max_sources is not None and len(met) > max_sources:
        raise SourceCapError(
            f"candidate meets {len(met)} training edges (cap {max_sources}); "
            "raise the cap or use a sparser dataset"
        )
    b = sum(1 for v in e if v >= n)
    kbar = params.kbar
    if b > kbar or params.beta[b] == 0.0:
        return SENTINEL
    sizes = _sizes.get(h_train)
    eta = params.eta
    log_eta = math.log(eta) if eta > 0 else -math.inf
    log_1m = math.log1p(-eta) if eta < 1 else -math.inf
    terms = []
    for f, c in met.items():
        j = int(sizes[f])
        g = len(e) - c - b
        if g > kbar or g > n - j or params.gamma[g] == 0.0:
            continue
        t = math.log(c / j) + math.log(params.gamma[g]) - log_comb(n - j, g)
        if c > 1:
            t += (c - 1) * log_eta
        if j > c:
            t += (j - c) * log_1m
        if t > -math.inf:
            terms.append(t)
    if not terms:
        return SENTINEL
    arr = np.array(terms)
    top = arr.max()
    return float(top + math.log(np.exp(arr - top).sum()) - math.log(m) + math.log(params.beta[b]))


# ----------------------------------------------------------------------
# negative samplers
# ----------------------------------------------------------------------


def sample_negatives_matched(h: TemporalHypergraph, count: int, rng_seed=0,
                             max_rejections: int = 100) -> list[tuple]:
    """Random node sets matching the size and degree profile of ``h``.

    Each size is drawn from the empirical size distribution, then that many
    distinct nodes are drawn with probability proportional to degree.  Sets
    equal to an observed edge are redrawn, at most ``max_rejections`` times
    per negative.
    """
    rng = np.random.default_rng(rng_seed)
    sizes = h.edge_sizes()
    deg = h.degrees().astype(float)
    p = deg / deg.sum()
    observed = set(h.edges)
    nodes = np.arange(h.n)
    out = []
    for _ in range(count):
        k = int(sizes[rng.integers(h.m)])
        for _attempt in range(max_rejections + 1):
            if k > h.n:
                cand = None
            else:
                cand = tuple(sorted(rng.choice(nodes, size=k, replace=False, p=p).tolist()))
            if cand is not None and cand not in observed:
                out.append(cand)
                break
        else:
            raise RejectionBudgetError(
                f"no non-observed set of size {k} after {max_rejections} rejections"
            )
    return out


def sample_negatives_halfswap(positives, h: TemporalHypergraph, rng_seed=0) -> list[tuple]:
    """Replace ``floor(k/2)`` nodes of each positive by random non-members.

    Positives with a single node are skipped (with a warning), as are
    positives too large to leave room for replacements.
    """
    rng = np.random.default_rng(rng_seed)
    out = []
    skipped = 0
    for e in positives:
        e = tuple(sorted(e))
        k = len(e)
        half = k // 2
        if half == 0 or h.n - k < half:
            skipped += 1
            continue
        drop = set(rng.choice(k, size=half, replace=False).tolist())
        keep = [v for i, v in enumerate(e) if i not in drop]
        members = set(e)
        new: set = set()
        while len(new) < half:
            x = int(rng.integers(h.n))
            if x not in members and x not in new:
                new.add(x)
        out.append(tuple(sorted(keep + sorted(new))))
    if skipped:
        log.warning("half-swap: skipped %d positive(s) that cannot be half-swapped", skipped)
    return out


# ----------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------


def _check_labels(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if y.all() or not y.any():
        raise ValueError("need at least one positive and one negative")
    return s, y


def auc(scores, labels) -> float:
    """Area under the ROC curve by the rank-sum statistic; ties count one half.

    ``-inf`` scores rank below every finite score and tie with each other.
    """
    s, y = _check_labels(scores, labels)
    # average ranks; -inf sorts first and ties are grouped like any value
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    ranks = np.empty(len(s))
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j + 1 < n and ss[j + 1] == ss[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos = int(y.sum())
    n_neg = n - n_pos
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1_at_threshold(scores, labels, threshold: float) -> float:
    s, y = _check_labels(scores, labels)
    pred = s > threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def f1_at_median(scores, labels, reference=None) -> float:
    """F1 when predicting positive for scores strictly above the median.

    The median is over ``scores`` (pooled candidates) unless ``reference``
    scores are given.
    """
    base = np.asarray(scores if reference is None else reference, dtype=float)
    return f1_at_threshold(scores, labels, _median(base))


def _median(x: np.ndarray) -> float:
    # np.median mixes -inf into nan when averaging two middle values
    xs = np.sort(x)
    n = len(xs)
    if n == 0:
        raise ValueError("empty score list")
    lo, hi = xs[(n - 1) // 2], xs[n // 2]
    if lo == hi:
        return float(lo)
    if not np.isfinite(lo):
        return float(lo)
    return float(0.5 * (lo + hi))


# ----------------------------------------------------------------------
# pipeline
# ----------------------------------------------------------------------


@dataclass
class EvalConfig:
    ordering: str = "temporal"
    negatives: str = "matched"
    train_frac: float = 0.2
    max_pos: int = 100_000
    rng_seed: int = 0
    kbar: int | None = None          # default: largest edge size of the input
    batch_size: int = 30
    threshold: str = "pooled"        # or "train": median of training-edge scores
    max_sources: int = 1_000_000

    def __post_init__(self):
        if self.ordering not in ("temporal", "shuffled"):
            raise ValueError("ordering must be 'temporal' or 'shuffled'")
        if self.negatives not in ("matched", "halfswap"):
            raise ValueError("negatives must be 'matched' or 'halfswap'")
        if self.threshold not in ("pooled", "train"):
            raise ValueError("threshold must be 'pooled' or 'train'")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must be in (0, 1)")


@dataclass
class EvalReport:
    auc: float
    f1: float
    n_pos: int
    n_neg: int
    threshold: float
    unseen_fraction: float
    params: ModelParams
    converged: bool
    seconds_fit: float
    seconds_score: float
    config: EvalConfig
    candidates: list = field(default_factory=list, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "auc": self.auc,
            "f1": self.f1,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "threshold": self.threshold,
            "unseen_fraction": self.unseen_fraction,
            "converged": self.converged,
            "params": self.params.to_dict(),
            "config": asdict(self.config),
        }
        if timing:
            d["seconds_fit"] = self.seconds_fit
            d["seconds_score"] = self.seconds_score
        return d


def split_train_test(h: TemporalHypergraph, config: EvalConfig, rng: np.random.Generator):
    """Training hypergraph, held-out positives (original ids) and id map.

    The map sends original node ids to training ids; unseen nodes get fresh
    ids from ``h_train.n`` upward.
    """
    m_train = max(2, int(round(config.train_frac * h.m)))
    if m_train >= h.m:
        raise ValueError(f"not enough edges ({h.m}) for a train/test split")
    if config.ordering == "temporal":
        train = h.prefix(m_train)
        rest = list(range(m_train, h.m))
        positives_idx = rest[: config.max_pos]
        old_ids = list(range(train.n))
    else:
        perm = rng.permutation(h.m)
        train_idx = np.sort(perm[:m_train])
        rest = np.sort(perm[m_train:])
        train = h.reordered(train_idx.tolist())
        # recover the original ids of the training nodes
        seen: dict[int, int] = {}
        for t in train_idx.tolist():
            for v in h.edges[t]:
                if v not in seen:
                    seen[v] = len(seen)
        old_ids = sorted(seen, key=seen.get)
        if len(rest) > config.max_pos:
            rest = np.sort(rng.choice(rest, size=config.max_pos, replace=False))
        positives_idx = rest.tolist()
    positives = [h.edges[i] for i in positives_idx]
    return train, positives, {v: i for i, v in enumerate(old_ids)}


def _to_train_ids(e, id_map: dict, n_train: int):
    out = []
    fresh = n_train
    for v in e:
        w = id_map.get(v)
        if w is None:
            w = fresh
            fresh += 1
        out.append(w)
    return tuple(sorted(out)), fresh > n_train


def evaluate(h: TemporalHypergraph, config: EvalConfig | None = None) -> EvalReport:
    """Fit on a training split, score held-out edges against negatives.

    Parameters are fitted by SEM on the training edges and held fixed while
    scoring.  Positives containing nodes unseen in training are scored
    (through the novel-node distribution) and their fraction is reported.
    """
    config = config or EvalConfig()
    rng = np.random.default_rng(config.rng_seed)
    train, positives, id_map = split_train_test(h, config, rng)
    kbar = config.kbar if config.kbar is not None else int(h.edge_sizes().max())
    sub_seeds = rng.integers(0, 2**63, size=2)
    t0 = time.perf_counter()
    params, trace = sem_fit(train, SemConfig(kbar=kbar, batch_size=config.batch_size),
                            rng_seed=int(sub_seeds[0]))
    t1 = time.perf_counter()

    if config.negatives == "matched":
        negatives = sample_negatives_matched(h, len(positives), rng_seed=int(sub_seeds[1]))
    else:
        negatives = sample_negatives_halfswap(positives, h, rng_seed=int(sub_seeds[1]))

    candidates = []
    unseen = 0
    for label, group in ((1, positives), (0, negatives)):
        for e in group:
            mapped, has_unseen = _to_train_ids(e, id_map, train.n)
            if label and has_unseen:
                unseen += 1
            score = candidate_score(mapped, train, params, max_sources=config.max_sources)
            candidates.append(ScoredCandidate(tuple(e), label, score))
    t2 = time.perf_counter()

    scores = np.array([c.log_score for c in candidates])
    labels = np.array([c.label for c in candidates])
    if config.threshold == "train":
        ref = np.array([candidate_score(e, train, params) for e in train.edges])
        threshold = _median(ref)
    else:
        threshold = _median(scores)
    return EvalReport(
        auc=auc(scores, labels),
        f1=f1_at_threshold(scores, labels, threshold),
        n_pos=len(positives),
        n_neg=len(negatives),
        threshold=threshold,
        unseen_fraction=unseen / len(positives) if positives else 0.0,
        params=params,
        converged=trace.converged,
        seconds_fit=t1 - t0,
        seconds_score=t2 - t1,
        config=config,
        candidates=candidates,
    )


def shuffled_label_auc(report: EvalReport, rng_seed=0) -> float:
    """AUC after randomly permuting the labels: a no-signal control."""
    rng = np.random.default_rng(rng_seed)
    scores = np.array([c.log_score for c in report.candidates])
    labels = rng.permutation([c.label for c in report.candidates])
    return auc(scores, labels)
