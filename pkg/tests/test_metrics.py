import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercopy.core import TemporalHypergraph, relabel_by_first_appearance
from hypercopy.gen import ModelParams, simulate_hcm
from hypercopy.metrics import (
    degree_histogram,
    edge_size_histogram,
    intersection_density,
    log_checkpoints,
    rk_timeseries,
    tail_slope,
    total_variation,
)

from oracles import pair_counts, random_hypergraph


def test_two_disjoint_edges():
    r = intersection_density(TemporalHypergraph([(0, 1), (2, 3)]), 1)
    assert r[0] == 1.0 and r[1:].sum() == 0


def test_two_identical_edges():
    r = intersection_density(TemporalHypergraph([(0, 1, 2), (0, 1, 2)]), 1, kmax=4)
    assert r[3] == 1.0 and r.sum() == 1.0


def test_overflow_bucket():
    e = tuple(range(6))
    r = intersection_density(TemporalHypergraph([e, e]), 1, kmax=3)
    assert r[-1] == 1.0 and r.size == 5


def test_needs_two_edges():
    with pytest.raises(ValueError):
        intersection_density(TemporalHypergraph([(0,)]), 0)


def test_matches_quadratic_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = int(rng.integers(2, 300))
        h = random_hypergraph(rng, m, n_max=40, size_max=6)
        kmax = int(rng.integers(1, 6))
        counts = rk_timeseries(h, [m], kmax=kmax).counts[0]
        assert np.array_equal(counts, pair_counts(h.edges, kmax))


def test_incremental_rows_match_recomputation():
    h = simulate_hcm(ModelParams(0.3, [0.5, 0.5], [0.0, 0.5, 0.5]), 1500, rng_seed=2)
    cps = log_checkpoints(h.m, per_decade=5)
    series = rk_timeseries(h, cps, kmax=8)
    for row, m in zip(series.rk, cps):
        assert np.array_equal(row, intersection_density(h, m - 1, kmax=8))
    assert np.allclose(series.rk.sum(axis=1), 1.0, atol=1e-12)
    single = rk_timeseries(h, [h.m], kmax=8)
    assert np.array_equal(single.rk[0], intersection_density(h, h.m - 1, kmax=8))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(0, 10), min_size=1, max_size=5, unique=True),
                min_size=2, max_size=40))
def test_rk_properties(edges):
    new, _ = relabel_by_first_appearance(edges)
    h = TemporalHypergraph(new)
    series = rk_timeseries(h, list(range(2, h.m + 1)), kmax=3)
    assert np.all(series.counts >= 0)
    assert np.array_equal(series.counts.sum(axis=1), series.pairs)
    assert np.allclose(series.rk.sum(axis=1), 1.0, atol=1e-9)


def test_checkpoint_validation():
    h = TemporalHypergraph([(0,), (0,), (0,)])
    with pytest.raises(ValueError):
        rk_timeseries(h, [3, 2])
    with pytest.raises(ValueError):
        rk_timeseries(h, [4])


def test_log_checkpoints():
    cps = log_checkpoints(10**6, per_decade=10)
    assert cps[0] == 10 and cps[-1] == 10**6
    assert all(b > a for a, b in zip(cps, cps[1:]))
    assert 45 <= len(cps) <= 60
    assert log_checkpoints(1) == []


def test_histograms():
    h = TemporalHypergraph([(0, 1, 2)])
    assert degree_histogram(h) == {1: 3}
    rng = np.random.default_rng(3)
    h = random_hypergraph(rng, 80, n_max=25)
    assert sum(degree_histogram(h).values()) == h.n
    assert sum(edge_size_histogram(h).values()) == h.m
    upto = 30
    nodes = {v for t in range(upto + 1) for v in h.edges[t]}
    deg = {v: sum(v in h.edges[t] for t in range(upto + 1)) for v in nodes}
    ref: dict = {}
    for d in deg.values():
        ref[d] = ref.get(d, 0) + 1
    assert degree_histogram(h, upto) == ref
    sizes: dict = {}
    for t in range(upto + 1):
        sizes[len(h.edges[t])] = sizes.get(len(h.edges[t]), 0) + 1
    assert edge_size_histogram(h, upto) == sizes


def test_hill_on_exact_power_law():
    rng = np.random.default_rng(4)
    zeta, dmin = 3.0, 10
    # inverse-CDF draws from the continuous Pareto tail above dmin
    x = dmin * (1 - rng.random(10**5)) ** (-1 / (zeta - 1))
    vals, counts = np.unique(x, return_counts=True)
    hist = dict(zip(vals.tolist(), counts.tolist()))
    assert abs(tail_slope(hist, dmin) - zeta) < 0.05


def test_hill_requires_tail():
    with pytest.raises(ValueError):
        tail_slope({1: 100, 2: 50, 3: 5}, dmin=10)


def test_total_variation():
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert total_variation([0.5, 0.5], [0.5, 0.5, 0.0]) == 0.0
