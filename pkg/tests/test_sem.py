import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercopy.core import TemporalHypergraph
from hypercopy.gen import ModelParams, simulate_hcm
from hypercopy.sem import (
    SemConfig,
    SuffStats,
    edge_generation_likelihood,
    expected_sufficient_stats,
    kl_divergence,
    m_step,
    posterior_over_sources,
    sem_fit,
)

from oracles import dense_posterior, dense_stats, likelihood, random_hypergraph, random_params

TRIALS = 200


# ---------------------------------------------------------------- likelihood


def test_likelihood_single_node():
    p = ModelParams(0.4, [0.7, 0.3], [0.6, 0.4])
    # f = {a}, e = {a}, one node before the step
    assert edge_generation_likelihood((0,), (0,), 1, p) == pytest.approx(0.7 * 0.6, rel=1e-15)
    assert likelihood((0,), (0,), 1, p) == pytest.approx(0.7 * 0.6, rel=1e-15)


def test_likelihood_drop_partner():
    for eta in (0.0, 0.3, 0.9):
        p = ModelParams(eta, [0.7, 0.3], [0.6, 0.4])
        want = 0.5 * (1 - eta) * 0.7 * 0.6
        assert edge_generation_likelihood((0,), (0, 1), 2, p) == pytest.approx(want, rel=1e-15)


def test_likelihood_disjoint_is_zero():
    p = ModelParams(0.4, [0.7, 0.3], [0.6, 0.4])
    assert edge_generation_likelihood((2,), (0, 1), 3, p) == 0.0


def test_likelihood_index_beyond_kbar_is_zero():
    p = ModelParams(0.4, [0.7, 0.3], [0.6, 0.4])
    # three novel nodes with kbar = 1
    assert edge_generation_likelihood((0, 5, 6, 7), (0,), 5, p) == 0.0


def test_likelihood_matches_enumeration():
    rng = np.random.default_rng(10)
    for _ in range(TRIALS):
        m = int(rng.integers(2, 21))
        h = random_hypergraph(rng, m, n_max=9, size_max=4)
        params = random_params(rng, kbar=2)
        upto = int(rng.integers(1, m))
        n_prior = int(h.nodes_before[upto])
        e = h.edges[upto]
        for f in h.edges[:upto]:
            got = edge_generation_likelihood(e, f, n_prior, params)
            ref = likelihood(e, f, n_prior, params)
            assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------- posterior


def test_posterior_single_candidate():
    h = TemporalHypergraph([(0, 1), (2,), (0, 3)])
    post = posterior_over_sources((0, 3), h, 2, ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]))
    assert post.as_dict() == {0: 1.0}


def test_posterior_symmetric_duplicates():
    h = TemporalHypergraph([(0, 1), (0, 1), (0, 2)])
    post = posterior_over_sources((0, 2), h, 2, ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]))
    assert post.as_dict() == {0: 0.5, 1: 0.5}


def test_posterior_null_when_disjoint():
    h = TemporalHypergraph([(0, 1), (2,)])
    post = posterior_over_sources((2,), h, 1, ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]))
    assert post.is_null
    with pytest.raises(ValueError):
        expected_sufficient_stats((2,), h, 1, ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]))


def test_posterior_requires_history():
    h = TemporalHypergraph([(0,)])
    with pytest.raises(ValueError):
        posterior_over_sources((0,), h, 0, ModelParams(0.5, [1.0], [1.0]))


def test_posterior_matches_dense_oracle():
    rng = np.random.default_rng(11)
    for _ in range(TRIALS):
        m = int(rng.integers(2, 21))
        h = random_hypergraph(rng, m, n_max=10, size_max=4)
        params = random_params(rng, kbar=2)
        upto = int(rng.integers(1, m))
        e = h.edges[upto]
        ref = dense_posterior(e, h, upto, params)
        got = posterior_over_sources(e, h, upto, params).as_dict()
        assert set(got) == set(ref)
        for t in ref:
            assert abs(got[t] - ref[t]) <= 1e-12


def test_posterior_support_is_strictly_earlier():
    h = simulate_hcm(ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]), 400, rng_seed=1)
    params = ModelParams(0.5, [0.5, 0.5], [0.5, 0.5])
    for t in range(1, h.m, 7):
        post = posterior_over_sources(h.edges[t], h, t, params)
        assert post.sources.size == 0 or post.sources.max() < t


# ---------------------------------------------------------------- sufficient statistics


def test_stats_single_candidate():
    h = TemporalHypergraph([(0, 1, 2), (0, 1, 3)])
    s = expected_sufficient_stats((0, 1, 3), h, 1, ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]))
    assert (s.s1, s.s2) == (2.0, 1.0)
    assert s.s3.tolist() == [0.0, 1.0] and s.s4.tolist() == [1.0, 0.0]


def test_stats_two_novel_nodes():
    h = TemporalHypergraph([(0, 1), (0, 2, 3)])
    s = expected_sufficient_stats((0, 2, 3), h, 1, ModelParams(0.5, [1.0], [0.2, 0.4, 0.4]))
    assert s.s3.tolist() == [0.0, 0.0, 1.0]


def test_stats_match_dense_oracle():
    rng = np.random.default_rng(12)
    done = 0
    while done < TRIALS:
        m = int(rng.integers(2, 21))
        h = random_hypergraph(rng, m, n_max=10, size_max=4)
        params = random_params(rng, kbar=2)
        upto = int(rng.integers(1, m))
        e = h.edges[upto]
        if posterior_over_sources(e, h, upto, params).is_null:
            continue
        s = expected_sufficient_stats(e, h, upto, params)
        s1, s2, s3, s4 = dense_stats(e, h, upto, params)
        assert abs(s.s1 - s1) <= 1e-12 and abs(s.s2 - s2) <= 1e-12
        assert np.max(np.abs(s.s3 - s3)) <= 1e-12 and np.max(np.abs(s.s4 - s4)) <= 1e-12
        assert s.s1 >= 1 - 1e-12
        assert abs(s.s3.sum() - 1) <= 1e-9 and abs(s.s4.sum() - 1) <= 1e-9
        # a single observation's M-step agrees too
        a, b = m_step(s), m_step(SuffStats(s1, s2, s3, s4))
        assert abs(a.eta - b.eta) <= 1e-12
        done += 1


# ---------------------------------------------------------------- M-step


def _stats(s1, s2):
    return SuffStats(s1, s2, np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_m_step_examples():
    assert m_step(_stats(1.0, 0.0)).eta == 0.0
    assert m_step(_stats(1.0, 3.0)).eta == 0.0
    assert m_step(_stats(3.0, 0.0)).eta == 1.0
    assert m_step(_stats(2.0, 2.0)).eta == pytest.approx(1 / 3)
    p = m_step(_stats(2.0, 2.0))
    assert p.gamma.tolist() == [0.0, 1.0] and p.beta.tolist() == [1.0, 0.0]


@settings(max_examples=100, deadline=None)
@given(s1=st.floats(1, 50), s2=st.floats(0, 50),
       w3=st.lists(st.floats(0.01, 1), min_size=3, max_size=3),
       w4=st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_m_step_gives_valid_params(s1, s2, w3, w4):
    s3 = np.array(w3) / sum(w3)
    s4 = np.array(w4) / sum(w4)
    p = m_step(SuffStats(s1, s2, s3, s4))
    assert 0.0 <= p.eta <= 1.0
    assert np.allclose(p.gamma, s4) and np.allclose(p.beta, s3)


# ---------------------------------------------------------------- SEM driver


@pytest.fixture(scope="module")
def hcm_graph():
    params = ModelParams(0.5, [0.3, 0.5, 0.2], [0.2, 0.5, 0.3])
    return params, simulate_hcm(params, 3000, rng_seed=5)


def test_first_step_equals_batch_average(hcm_graph):
    """With rho(1) = 1 the first estimate is the M-step of the first batch average."""
    _, h = hcm_graph
    seed, batch = 7, 30
    u = np.full(3, 1 / 3)
    for init in (ModelParams(0.5, u, u), ModelParams(0.9, [0.1, 0.1, 0.8], [0.8, 0.1, 0.1])):
        got, _ = sem_fit(h, SemConfig(kbar=2, batch_size=batch, max_steps=1, init=init),
                         rng_seed=seed)
        rng = np.random.default_rng(seed)
        idxs = 1 + rng.choice(h.m - 1, size=batch, replace=False)
        total = SuffStats.zeros(2)
        for t in idxs:
            total = total + expected_sufficient_stats(h.edges[t], h, int(t), init)
        ref = m_step(total.scale(1 / batch))
        assert got.eta == pytest.approx(ref.eta, abs=1e-12)
        assert np.allclose(got.gamma, ref.gamma, atol=1e-12)
        assert np.allclose(got.beta, ref.beta, atol=1e-12)


def test_trace_invariants_and_no_skips(hcm_graph):
    _, h = hcm_graph
    params, trace = sem_fit(h, SemConfig(kbar=2), rng_seed=3)
    assert trace.skipped == 0 and trace.skipped_fraction == 0.0
    for r in trace.records:
        assert 0 <= r.eta <= 1
        assert abs(r.gamma.sum() - 1) < 1e-9 and np.all(r.gamma >= 0)
        assert abs(r.beta.sum() - 1) < 1e-9 and np.all(r.beta >= 0)
    assert trace.converged
    assert [r.tau for r in trace.records][:2] == [100, 200]


def test_fit_recovers_eta(hcm_graph):
    truth, h = hcm_graph
    params, trace = sem_fit(h, SemConfig(kbar=2), rng_seed=4)
    assert abs(params.eta - truth.eta) < 0.05
    assert kl_divergence(truth.beta, params.beta) < 0.05


def test_fit_determinism(hcm_graph):
    _, h = hcm_graph
    a, ta = sem_fit(h, SemConfig(kbar=2, ordering="shuffled"), rng_seed=9)
    b, tb = sem_fit(h, SemConfig(kbar=2, ordering="shuffled"), rng_seed=9)
    assert a == b
    strip = lambda tr: [(r.tau, r.eta, r.gamma.tolist(), r.beta.tolist()) for r in tr.records]
    assert strip(ta) == strip(tb) and ta.eta_path == tb.eta_path


def test_copy_free_data_gives_zero_eta():
    # each edge keeps only its seed: every overlap with history is one node
    h = simulate_hcm(ModelParams(0.0, [1.0], [0.0, 0.5, 0.5]), 2000, rng_seed=2)
    params, _ = sem_fit(h, SemConfig(kbar=2), rng_seed=1)
    assert params.eta == 0.0


def test_shuffled_exhaustion_reports_nonconverged():
    h = simulate_hcm(ModelParams(0.5, [0.5, 0.5], [0.5, 0.5]), 500, rng_seed=2)
    params, trace = sem_fit(h, SemConfig(kbar=1, ordering="shuffled"), rng_seed=0)
    assert trace.exhausted and not trace.converged
    assert trace.records and trace.steps < 2 * 100
    assert trace.samples + trace.skipped <= h.m - 1


def test_fit_needs_two_edges():
    with pytest.raises(ValueError):
        sem_fit(TemporalHypergraph([(0,)]), SemConfig(kbar=1))


def test_config_validation():
    with pytest.raises(ValueError):
        SemConfig(kbar=2, ordering="random")
    assert SemConfig.schedule(1) == 1.0


def test_kl_divergence():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
