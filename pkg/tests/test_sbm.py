import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commlab._random import substream
from commlab.errors import DomainError, GuardError
from commlab.sbm import (
    SbmParams,
    _decode_upper_pairs,
    balanced_q,
    generate_sbm,
    p_intra_for_degree,
    skip_sample,
)


def test_balanced_q_benchmark_setting():
    q = balanced_q(100_000, 20, 0.3)
    assert q == pytest.approx(0.3 * 19 / 99_980, rel=1e-12)
    assert q == pytest.approx(5.701e-5, rel=1e-3)
    assert SbmParams(100_000, 20, 0.3, q, 0).expected_degree() == pytest.approx(11.4, rel=1e-3)


def test_balanced_q_two_blocks():
    assert balanced_q(40, 20, 1.0) == pytest.approx(0.95)


def test_balanced_q_domain():
    with pytest.raises(DomainError):
        balanced_q(20, 20, 0.3)
    with pytest.raises(DomainError):
        balanced_q(10, 1, 0.3)


def test_params_validation():
    with pytest.raises(DomainError):
        SbmParams(30, 20, 0.3, 0.01, 0)
    with pytest.raises(DomainError):
        SbmParams(40, 20, 0.3, 0.5, 0)


def test_p_intra_for_degree():
    p = p_intra_for_degree(11.4, 20)
    assert p == pytest.approx(0.3)
    with pytest.raises(DomainError):
        p_intra_for_degree(100, 20)


def test_two_cliques():
    g, cs = generate_sbm(SbmParams(40, 20, 1.0, 0.0, 5))
    assert g.edge_count == 2 * 190
    assert [list(c) for c in cs.communities] == [list(range(20)), list(range(20, 40))]
    assert np.all(g.degrees == 19)


def test_sparse_setting_mean_degree():
    n, b, p = 10_000, 20, 0.1
    q = balanced_q(n, b, p)
    assert q == pytest.approx(1.9 / 9980)
    means = [generate_sbm(SbmParams(n, b, p, q, s))[0].degrees.mean() for s in range(10)]
    assert np.mean(means) == pytest.approx(3.8, rel=0.05)


def test_middle_setting_mean_degree_each_seed():
    n, b, p = 10_000, 20, 0.3
    q = balanced_q(n, b, p)
    for s in range(5):
        g, _ = generate_sbm(SbmParams(n, b, p, q, s))
        assert g.degrees.mean() == pytest.approx(11.4, rel=0.05)


def test_full_scale_counts():
    params = SbmParams(100_000, 20, 0.3, balanced_q(100_000, 20, 0.3), 1)
    g, cs = generate_sbm(params)
    assert len(cs.communities) == 5000
    # the benchmark SBM at this size has about 585K edges
    assert g.edge_count == pytest.approx(585_000, rel=0.03)


def test_intra_density_within_three_sigma():
    n, b, p = 10_000, 20, 0.3
    g, cs = generate_sbm(SbmParams(n, b, p, balanced_q(n, b, p), 9))
    blocks = np.arange(n) // b
    e = g.edges()
    intra = np.count_nonzero(blocks[e[:, 0]] == blocks[e[:, 1]])
    pairs = (n // b) * b * (b - 1) // 2
    sigma = math.sqrt(pairs * p * (1 - p))
    assert abs(intra - p * pairs) <= 3 * sigma


def test_reproducible_and_seed_sensitive():
    params = SbmParams(2000, 20, 0.3, balanced_q(2000, 20, 0.3), 42)
    a, _ = generate_sbm(params)
    b, _ = generate_sbm(params)
    assert a == b
    c, _ = generate_sbm(SbmParams(2000, 20, 0.3, params.q_inter, 43))
    assert a != c


def test_edge_budget_guard():
    with pytest.raises(GuardError, match="budget"):
        generate_sbm(SbmParams(10_000, 20, 1.0, 0.5, 0), edge_budget=1_000_000)


@given(st.integers(2, 60))
@settings(max_examples=40, deadline=None)
def test_decode_upper_pairs_exhaustive(k):
    s, t = np.triu_indices(k, 1)
    ds, dt = _decode_upper_pairs(np.arange(len(s)), k)
    assert np.array_equal(ds, s) and np.array_equal(dt, t)


def test_decode_upper_pairs_large_k():
    k = 5000
    idx = np.array([0, 1, k - 2, k - 1, k * (k - 1) // 2 - 1])
    s, t = _decode_upper_pairs(idx, k)
    start = s * (2 * k - s - 1) // 2
    assert np.all(start + (t - s - 1) == idx)
    assert np.all((0 <= s) & (s < t) & (t < k))


def test_skip_sample_rate():
    rng = substream(0, 0)
    total, p = 1_000_000, 0.01
    hits = skip_sample(total, p, rng)
    assert np.all(np.diff(hits) > 0) and hits[-1] < total
    sigma = math.sqrt(total * p * (1 - p))
    assert abs(len(hits) - total * p) <= 4 * sigma


def test_skip_sample_extremes():
    rng = substream(0, 0)
    assert len(skip_sample(100, 0.0, rng)) == 0
    assert np.array_equal(skip_sample(7, 1.0, rng), np.arange(7))
