"""Empirical structure of a temporal hypergraph.

Intersection densities ``r_k`` (fraction of unordered edge pairs meeting in
exactly ``k`` nodes), degree and edge-size histograms, and a Hill estimate of
the degree-tail exponent.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import TemporalHypergraph


@dataclass
class RkSeries:
    """``r_k`` at a list of prefix lengths.

    ``counts[row, k]`` is the number of unordered pairs among the first
    ``checkpoints[row]`` edges whose intersection has ``k`` nodes; the last
    column (``k = kmax + 1``) collects larger intersections.
    """

    checkpoints: np.ndarray
    counts: np.ndarray
    kmax: int

    @property
    def pairs(self) -> np.ndarray:
        m = self.checkpoints.astype(np.int64)
        return m * (m - 1) // 2

    @property
    def rk(self) -> np.ndarray:
        """Fractions; column ``kmax + 1`` is the overflow bucket."""
        pairs = self.pairs.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.counts / np.where(pairs > 0, pairs, np.nan)[:, None]
        return out


def _overlap_counts(h: TemporalHypergraph, stop: int, kmax: int, checkpoints):
    """Walk edges ``0..stop-1``, yielding cumulative overlap counts at checkpoints.

    For edge ``t`` the earlier edges it meets are found from the incidence
    lists of its nodes (restricted to indices below ``t``); each earlier
    edge is counted once per shared node, which gives ``|e_t & e_s|``.
    """
    counts = np.zeros(kmax + 2, dtype=np.int64)
    rows = []
    seen_by_node = [0] * h.n  # how many entries of incidence[v] precede the cursor
    incidence = h.incidence
    edges = h.edges
    cps = list(checkpoints)
    ci = 0
    while ci < len(cps) and cps[ci] <= 0:
        rows.append(_finalise(counts, 0, kmax))
        ci += 1
    for t in range(stop):
        e = edges[t]
        if len(e) == 1:
            v = e[0]
            c = seen_by_node[v]
            if c:
                counts[1] += c
            seen_by_node[v] = c + 1
        else:
            met = Counter()
            for v in e:
                c = seen_by_node[v]
                if c:
                    met.update(incidence[v][:c])
                seen_by_node[v] = c + 1
            if met:
                for k, cnt in Counter(met.values()).items():
                    counts[k if k <= kmax else kmax + 1] += cnt
        while ci < len(cps) and cps[ci] == t + 1:
            rows.append(_finalise(counts, t + 1, kmax))
            ci += 1
    return rows


def _finalise(counts, m, kmax):
    row = counts.copy()
    row[0] = m * (m - 1) // 2 - int(counts[1:].sum())
    return row


def intersection_density(h: TemporalHypergraph, upto: int, kmax: int = 12) -> np.ndarray:
    """``r_k`` for ``k = 0..kmax`` plus an overflow entry, over edges ``0..upto``.

    ``r_0`` is obtained by complement.  Needs at least two edges in the prefix.
    """
    m = min(upto + 1, h.m)
    if m < 2:
        raise ValueError("need at least two edges")
    row = _overlap_counts(h, m, kmax, [m])[0]
    return row / (m * (m - 1) // 2)


def rk_timeseries(h: TemporalHypergraph, checkpoints, kmax: int = 12) -> RkSeries:
    """Exact ``r_k`` at every prefix length in ``checkpoints`` (one pass)."""
    cps = [int(c) for c in checkpoints]
    if any(b < a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be sorted ascending")
    if cps and cps[-1] > h.m:
        raise ValueError(f"checkpoint {cps[-1]} exceeds the number of edges {h.m}")
    rows = _overlap_counts(h, cps[-1] if cps else 0, kmax, cps)
    return RkSeries(np.array(cps, dtype=np.int64), np.array(rows, dtype=np.int64).reshape(len(cps), kmax + 2), kmax)


def log_checkpoints(m: int, per_decade: int = 10, start: int = 10) -> list[int]:
    """Roughly log-spaced integers in ``[start, m]``, always ending at ``m``."""
    if m < 2:
        return []
    start = max(2, min(start, m))
    n = max(2, int(math.ceil(per_decade * math.log10(m / start))) + 1)
    grid = np.unique(np.round(np.logspace(math.log10(start), math.log10(m), n)).astype(np.int64))
    grid = grid[(grid >= 2) & (grid <= m)]
    out = grid.tolist()
    if not out or out[-1] != m:
        out.append(m)
    return out


def degree_histogram(h: TemporalHypergraph, upto: int | None = None) -> dict[int, int]:
    """Degree -> number of nodes with that degree among nodes present by ``upto``."""
    deg = h.degrees(upto)
    deg = deg[deg > 0]
    values, counts = np.unique(deg, return_counts=True)
    return dict(zip(values.tolist(), counts.tolist()))


def edge_size_histogram(h: TemporalHypergraph, upto: int | None = None) -> dict[int, int]:
    values, counts = np.unique(h.edge_sizes(upto), return_counts=True)
    return dict(zip(values.tolist(), counts.tolist()))


def tail_slope(histogram: dict[int, int], dmin: int = 10) -> float:
    """Hill estimate ``1 + N / sum(log(d_i / dmin))`` over observations ``d_i >= dmin``.

    Uses the continuous approximation.  Requires at least ten distinct
    values at or above ``dmin``.
    """
    tail = {d: c for d, c in histogram.items() if d >= dmin and c > 0}
    if len(tail) < 10:
        raise ValueError(f"need >= 10 distinct values >= dmin={dmin}, have {len(tail)}")
    d = np.array(list(tail), dtype=float)
    c = np.array(list(tail.values()), dtype=float)
    total = float(np.dot(c, np.log(d / dmin)))
    if total <= 0:
        raise ValueError("degenerate tail (all observations equal dmin)")
    return 1.0 + c.sum() / total


def total_variation(p, q) -> float:
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(p - q).sum())
