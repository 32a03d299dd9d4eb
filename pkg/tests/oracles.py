"""Brute-force reference implementations used by the tests.

Each oracle is deliberately naive: it enumerates outcomes or pairs directly
instead of reusing any indexed structure from the package.
"""

from itertools import combinations
from math import comb, log

import numpy as np

from hypercopy.core import TemporalHypergraph, relabel_by_first_appearance
from hypercopy.gen import ModelParams


def enumerate_step(f, n_prior, params: ModelParams):
    """All outcomes of one copy step from source ``f``.

    Returns ``{(frozenset(extant part), b): probability}``.  Draws of more
    extant nodes than exist outside ``f`` are treated as impossible.
    """
    f = tuple(f)
    j = len(f)
    outside = [v for v in range(n_prior) if v not in f]
    out = {}
    for v0 in f:
        rest = [v for v in f if v != v0]
        for r in range(len(rest) + 1):
            for kept in combinations(rest, r):
                p_copy = params.eta ** r * (1 - params.eta) ** (len(rest) - r)
                if p_copy == 0:
                    continue
                for g, pg in enumerate(params.gamma):
                    if pg == 0 or g > len(outside):
                        continue
                    sets = list(combinations(outside, g))
                    for extra in sets:
                        for b, pb in enumerate(params.beta):
                            if pb == 0:
                                continue
                            key = (frozenset((v0,) + kept + extra), b)
                            out[key] = out.get(key, 0.0) + p_copy * pg * pb / (j * len(sets))
    return out


def likelihood(e, f, n_prior, params):
    e = set(e)
    known = frozenset(v for v in e if v < n_prior)
    b = len(e) - len(known)
    return enumerate_step(f, n_prior, params).get((known, b), 0.0)


def dense_posterior(e, h: TemporalHypergraph, upto: int, params):
    """``{edge index: posterior}`` over every edge before ``upto``."""
    n_prior = len({v for t in range(upto) for v in h.edges[t]})
    w = {t: likelihood(e, h.edges[t], n_prior, params) for t in range(upto)}
    total = sum(w.values())
    if total == 0:
        return {}
    return {t: x / total for t, x in w.items() if x > 0}


def dense_stats(e, h, upto, params):
    post = dense_posterior(e, h, upto, params)
    n_prior = len({v for t in range(upto) for v in h.edges[t]})
    e = set(e)
    novel = sum(1 for v in e if v >= n_prior)
    kbar = params.kbar
    s1 = s2 = 0.0
    s3 = np.zeros(kbar + 1)
    s3[novel] = 1.0
    s4 = np.zeros(kbar + 1)
    for t, p in post.items():
        f = set(h.edges[t])
        s1 += p * len(f & e)
        s2 += p * len(f - e)
        s4[len({v for v in e - f if v < n_prior})] += p
    return s1, s2, s3, s4


def marginal_log_score(e, h: TemporalHypergraph, params):
    total = sum(likelihood(e, f, h.n, params) for f in h.edges) / h.m
    return log(total) if total > 0 else -np.inf


def pair_counts(edges, kmax):
    """Quadratic count of unordered pairs by intersection size (overflow last)."""
    counts = np.zeros(kmax + 2, dtype=np.int64)
    sets = [set(e) for e in edges]
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            k = len(sets[a] & sets[b])
            counts[min(k, kmax + 1)] += 1
    return counts


def quadratic_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def random_hypergraph(rng, m, n_max=10, size_max=4):
    """Random hypergraph relabelled by first appearance; edges may repeat."""
    edges = []
    for _ in range(m):
        k = min(int(rng.integers(1, size_max + 1)), n_max)
        edges.append(rng.choice(n_max, size=k, replace=False).tolist())
    new, _ = relabel_by_first_appearance(edges)
    return TemporalHypergraph(new)


def random_params(rng, kbar=2):
    eta = float(rng.uniform(0.05, 0.95))
    g = rng.dirichlet(np.ones(kbar + 1))
    b = rng.dirichlet(np.ones(kbar + 1))
    return ModelParams(eta, g, b)


def binomial_pmf(n, k, p):
    return comb(n, k) * p**k * (1 - p) ** (n - k)
