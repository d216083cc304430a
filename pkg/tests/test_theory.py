import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from commlab._random import substream
from commlab.embed import Embedding, direct_factorize
from commlab.errors import DomainError, GuardError, NumericError
from commlab.proximity import netmf_transform, walk_matrix_sum
from commlab.theory import (
    BELOW_REGIME,
    PerturbParams,
    block_construction,
    count_community_pairs,
    delta_sweep,
    gram_bound_campaign,
    gram_pair_bound,
    gram_row_check,
    lemma_thresholds,
    length_diagnostics,
    nsm,
    perturb,
    rescale_to_row_bound,
    row_log_normalizers,
    softmax_community_pairs,
    survival_experiment,
    verify_gram_bound,
)


def naive_nsm(V):
    """Unstabilized softmax in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    n = V.shape[1]
    S = [[mpmath.fsum(mpmath.mpf(float(a)) * mpmath.mpf(float(b)) for a, b in zip(V[:, i], V[:, j]))
          for j in range(n)] for i in range(n)]
    out = np.empty((n, n))
    for i in range(n):
        z = mpmath.fsum(mpmath.exp(s) for s in S[i])
        for j in range(n):
            out[i, j] = float(mpmath.exp(S[i][j]) / z)
    return out


def test_nsm_examples():
    assert np.allclose(nsm(np.zeros((3, 5))), 0.2, atol=0, rtol=1e-15)
    for t in (0.0, 3.0, 300.0):
        assert np.allclose(nsm(np.array([[t, t], [0.0, 0.0]])), 0.5, rtol=1e-15)


def test_nsm_matches_high_precision_oracle():
    for seed in range(5):
        V = substream(seed, 9).standard_normal((3, 3)) * 2
        P = nsm(V)
        assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
        assert np.abs(P - naive_nsm(V)).max() <= 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 12)), elements=st.floats(-30, 30)))
def test_nsm_rows_stochastic(V):
    P = nsm(V)
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-9
    lse = row_log_normalizers(V, chunk=5)
    S = V.T @ V
    assert np.allclose(np.log(np.maximum(P, 1e-300)), np.maximum(S - lse[:, None], math.log(1e-300)), atol=1e-8)


def test_nsm_errors():
    with pytest.raises(NumericError):
        with np.errstate(over="ignore"):
            nsm(np.array([[1e200, 1e200]]))
    with pytest.raises(GuardError):
        nsm(np.zeros((1, 20_001)))


def test_softmax_pairs_match_dense_count():
    for seed in range(5):
        V = substream(seed, 10).standard_normal((3, 40)) * 1.5
        eps = 0.05
        rows, cols = softmax_community_pairs(V, eps, chunk=7)
        dense = count_community_pairs(nsm(V), eps, keep_pairs=True)
        assert sorted(zip(rows.tolist(), cols.tolist())) == dense.pairs


def test_gram_row_check_examples():
    V = np.zeros((3, 4))
    V[0, 2] = 1.0
    c = gram_row_check(V)
    assert c.passes and c.max_row_sum == 1.0
    c = gram_row_check(np.eye(5))
    assert c.passes and c.max_row_sum == 1.0
    G = substream(0, 11).standard_normal((4, 30))
    assert not gram_row_check(G).passes
    scaled = rescale_to_row_bound(Embedding(G))
    assert gram_row_check(scaled).passes
    assert gram_row_check(scaled).max_row_sum == pytest.approx(1.0)


def test_signed_row_sums_do_not_bound_pairs():
    # x^T x has signed row sums 0 yet every pair reaches 1
    x = np.array([[1.0, 1, 1, -1, -1, -1]])
    c = gram_row_check(x)
    assert c.signed_passes and c.max_signed_row_sum == 0.0
    assert not c.passes
    M = x.T @ x
    assert count_community_pairs(M, 0.5).count == 6
    assert 6 > gram_pair_bound(1, 0.5)
    with pytest.raises(DomainError, match="rescale"):
        verify_gram_bound(x, 0.5)


def test_count_examples():
    assert count_community_pairs(np.zeros((4, 4)), 0.1).count == 0
    assert count_community_pairs(np.ones((4, 4)), 0.5).count == 6
    M = np.array([[0, 0.6, 0.1], [0.4, 0, 0.7], [0.9, 0.7, 0]])
    r = count_community_pairs(M, 0.4, keep_pairs=True)
    assert r.pairs == [(0, 1), (1, 2)]
    with pytest.raises(DomainError):
        count_community_pairs(M, 0.0)
    with pytest.raises(DomainError):
        count_community_pairs(np.ones((2, 3)), 0.1)


def test_bound_formula():
    assert gram_pair_bound(16, 0.1) == pytest.approx(800.0)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 16)), elements=st.floats(-5, 5)),
       st.sampled_from([0.05, 0.1, 0.2, 0.3]))
def test_bound_holds_after_rescale(V, eps):
    r = verify_gram_bound(V, eps, rescale=True)
    assert r.holds and r.count <= r.n * (r.n - 1) // 2


def test_small_campaign_clean():
    r = gram_bound_campaign(instances=500, seed=3)
    assert r.checks == 1500 and r.violations == 0
    assert 0 < r.max_count_to_bound <= 1


def test_direct_factorization_of_sbm_finds_few_pairs(small_sbm):
    g, cs = small_sbm
    e = direct_factorize(netmf_transform(walk_matrix_sum(g, 2), g, 1), 16)
    r = verify_gram_bound(e, 1 / 40, rescale=True)
    truth = int(np.sum(cs.partner_counts())) // 2
    assert truth == 3800
    assert r.count < 0.01 * g.node_count


def test_construction_geometry():
    e = block_construction(1024, 16, 8, seed=0)
    n, b = 1024, 16
    assert e.dim == math.ceil(8 * math.log(n))
    G = e.gram()
    block = np.arange(n) // b
    same = block[:, None] == block[None, :]
    assert np.allclose(G[same], 4 * math.log(n), rtol=1e-12)
    P = nsm(e)
    assert P[same].min() >= 1 / (2 * b)
    assert count_community_pairs(P, 1 / (2 * b)).count >= (n // b) * b * (b - 1) // 2


def test_cross_block_dot_variance():
    n, c = 1024, 8
    dots = []
    for seed in range(5):
        U = block_construction(n, 16, c, seed=seed).vectors[:, ::16]
        dots.append((U.T @ U)[np.triu_indices(U.shape[1], 1)])
    dots = np.concatenate(dots)
    d = math.ceil(c * math.log(n))
    # unit-free: |u|^2 |w|^2 / d for independent uniform directions
    expected = (4 * math.log(n)) ** 2 / d
    assert abs(dots.mean()) < 0.1 * math.sqrt(expected)
    assert dots.var() == pytest.approx(expected, rel=0.1)


def test_construction_validation_and_seeds():
    with pytest.raises(DomainError):
        block_construction(1000, 16, 8)
    a = block_construction(512, 16, 8, seed=4)
    assert np.array_equal(a.vectors, block_construction(512, 16, 8, seed=4).vectors)
    assert a.params["redraws"] >= 0


def test_perturb_moments_and_directions():
    V = substream(1, 12).standard_normal((3, 10_000))
    e = Embedding(V)
    delta = 0.1
    out = perturb(e, PerturbParams(delta, seed=5))
    ratio = np.log(np.linalg.norm(out.vectors, axis=0) / np.linalg.norm(V, axis=0))
    assert abs(ratio.mean()) <= 4 * delta / 100
    assert ratio.std() == pytest.approx(delta, rel=0.03)
    unit = V / np.linalg.norm(V, axis=0)
    assert np.allclose(out.vectors / np.linalg.norm(out.vectors, axis=0), unit, atol=1e-12)
    tiny = perturb(e, PerturbParams(1e-9, seed=5)).vectors
    assert np.abs(tiny - V).max() / np.abs(V).max() < 1e-7
    assert np.array_equal(out.vectors, perturb(e, PerturbParams(delta, seed=5)).vectors)
    assert not np.array_equal(out.vectors, perturb(e, PerturbParams(delta, seed=5), trial=1).vectors)


def test_perturb_params_validation():
    with pytest.raises(DomainError):
        PerturbParams(-0.1)
    with pytest.raises(DomainError):
        PerturbParams(0.1, trials=0)


@pytest.fixture(scope="module")
def construction():
    return block_construction(1024, 16, 8, seed=0)


def test_survival_baseline_and_collapse(construction):
    eps = 1 / 32
    r0 = survival_experiment(construction, eps, PerturbParams(0.0, trials=3))
    assert r0.survival == [1.0, 1.0, 1.0]
    assert r0.initial_pairs == 64 * 16 * 15 // 2
    r = survival_experiment(construction, eps, PerturbParams(0.2, trials=3))
    assert r.mean < 0.1
    rw = survival_experiment(construction, eps, PerturbParams(0.2, trials=3), workers=3)
    assert rw.survival == r.survival


def test_sweep_trend(construction):
    means = [r.mean for r in delta_sweep(construction, 1 / 32, (0.0, 0.01, 0.05, 0.2), trials=3)]
    assert means[0] == 1.0
    assert all(b <= a for a, b in zip(means, means[1:]))


def test_survival_needs_pairs():
    with pytest.raises(DomainError):
        survival_experiment(Embedding(np.zeros((2, 50))), 0.5, PerturbParams(0.1))


def test_lemma_thresholds():
    mpmath.mp.dps = 30
    big = mpmath.log(mpmath.mpf(10_000) / 32 / 100)
    length, diff = lemma_thresholds(10_000, 1 / 32)
    assert length == pytest.approx(float(mpmath.sqrt(big) / 2), rel=1e-14)
    assert length == pytest.approx(0.5337, abs=5e-4)
    assert diff == pytest.approx(float(2 * mpmath.log(32) / mpmath.sqrt(big)), rel=1e-14)
    assert lemma_thresholds(1024, 1 / 32) is None


def test_length_report_below_regime(construction):
    r = length_diagnostics(construction, 1 / 32)
    assert r.regime == BELOW_REGIME
    assert r.fraction_both is None
    assert r.max_difference == 0.0


def test_length_report_shared_vectors():
    e = block_construction(4096, 16, 8, seed=0)
    r = length_diagnostics(e, 1 / 32)
    assert r.regime == "ok"
    assert r.max_difference == 0.0
    assert r.fraction_both == 1.0 and r.vertex_fraction == 1.0


def test_length_report_counts_failures():
    # a short pair kept apart from everyone else by a long anti-aligned
    # background, next to a tight group of long vectors that passes
    n = 4096
    V = np.zeros((2, n))
    V[0, :2] = 0.2
    V[1, 2:18] = 10.0
    V[0, 18:] = -1000.0
    r = length_diagnostics(Embedding(V), 1 / 32)
    assert r.regime == "ok"
    assert r.pairs == 1 + 16 * 15 // 2
    assert r.fraction_length == pytest.approx(120 / 121)
    assert r.fraction_difference == 1.0
    assert r.fraction_both == r.fraction_length
    assert r.vertex_fraction == pytest.approx(1 - 2 / n)
