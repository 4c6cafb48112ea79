import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparseperm.errors import DimensionError, InsufficientDataError
from sparseperm.model import SparsePermutation, apply_permutation, synthesize
from sparseperm.oracles import max_inner_product_bruteforce
from sparseperm.recovery import (
    THRESHOLD,
    TOP_K,
    SupportEstimate,
    estimate_support_mad,
    estimate_support_topk,
    recover_permutation_on_support,
    recover_permutation_sorted,
    refit_excluding,
    support_from_permutation,
    two_stage,
)
from sparseperm.solvers import FixedLambda, SimulationRule, fit_ols


def test_topk_examples():
    s = estimate_support_topk(np.array([0.1, -5.0, 0.0, 2.0]), 2)
    assert s.indices == (1, 3) and s.method == TOP_K and s.threshold == 2.0
    assert estimate_support_topk(np.array([1.0, 1.0, 0.0]), 1).indices == (0,)
    empty = estimate_support_topk(np.array([1.0, 2.0]), 0)
    assert empty.indices == () and empty.threshold == 0.0


def test_topk_skips_zero_entries():
    s = estimate_support_topk(np.array([0.0, 3.0, 0.0, 0.0]), 3)
    assert s.indices == (1,)


def test_topk_range_error():
    with pytest.raises(DimensionError):
        estimate_support_topk(np.zeros(3), 4)


def test_mad_threshold_extension():
    e = np.zeros(50)
    e[:40] = np.linspace(-0.01, 0.01, 40)
    e[45] = 5.0
    s = estimate_support_mad(e)
    assert s.method == THRESHOLD
    assert 45 in s.indices and all(abs(e[i]) > s.threshold for i in s.indices)


def test_support_from_permutation():
    p = SparsePermutation(np.array([0, 3, 2, 1]))
    assert set(support_from_permutation(p).indices) == {1, 3}


def test_refit_empty_support_is_ols(rng):
    X = rng.standard_normal((12, 2))
    y = rng.standard_normal(12)
    np.testing.assert_allclose(refit_excluding(X, y, SupportEstimate((), 0.0)).beta, fit_ols(X, y).beta)


def test_refit_manual_subset(rng):
    X = rng.standard_normal((6, 1))
    y = rng.standard_normal(6)
    got = refit_excluding(X, y, SupportEstimate((0,), 0.0)).beta
    x, v = X[1:, 0], y[1:]
    assert got[0] == pytest.approx(x @ v / (x @ x), abs=1e-12)


def test_refit_true_support_noiseless():
    obs = synthesize(30, 3, 6, 0.0, 4)
    s = SupportEstimate(tuple(int(i) for i in obs.truth.pi_star.support()), 0.0)
    np.testing.assert_allclose(refit_excluding(obs.X, obs.y, s).beta, obs.truth.beta_star, atol=1e-12)


def test_refit_insufficient_rows():
    with pytest.raises(InsufficientDataError):
        refit_excluding(np.ones((3, 2)), np.ones(3), SupportEstimate((0,), 0.0))


def test_sorted_recovery_noiseless_full_scramble():
    obs = synthesize(30, 2, 30, 0.0, 6)
    pi = recover_permutation_sorted(obs.X, obs.y, obs.truth.beta_star)
    assert pi == obs.truth.pi_star
    np.testing.assert_allclose(obs.y, apply_permutation(pi, obs.X @ obs.truth.beta_star))


def test_sorted_recovery_aligned_is_identity(rng):
    X = rng.standard_normal((10, 2))
    theta = np.array([1.0, 0.5])
    assert recover_permutation_sorted(X, X @ theta, theta) == SparsePermutation.identity(10)


@pytest.mark.parametrize("n", range(1, 7))
def test_sorted_recovery_maximizes_inner_product(n):
    rng = np.random.default_rng(100 + n)
    X = rng.standard_normal((n, 2))
    y = rng.standard_normal(n)
    theta = rng.standard_normal(2)
    f = X @ theta
    pi = recover_permutation_sorted(X, y, theta)
    best, _ = max_inner_product_bruteforce(f, y)
    assert apply_permutation(pi, f) @ y == pytest.approx(best, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**9), st.floats(0.01, 100.0), st.floats(-10.0, 10.0))
def test_sorted_recovery_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 1))
    y = rng.standard_normal(15)
    p1 = recover_permutation_sorted(X, y, np.array([1.0]))
    # a x + b as fitted values via an intercept column
    X2 = np.column_stack([X[:, 0], np.ones(15)])
    p2 = recover_permutation_sorted(X2, y, np.array([a, b]))
    assert p1 == p2


def test_on_support_examples(rng):
    X = rng.standard_normal((8, 2))
    y = rng.standard_normal(8)
    theta = np.array([0.3, -1.0])
    assert recover_permutation_on_support(X, y, SupportEstimate((), 0.0), theta) == SparsePermutation.identity(8)
    full = SupportEstimate(tuple(range(8)), 0.0)
    assert recover_permutation_on_support(X, y, full, theta) == recover_permutation_sorted(X, y, theta)


@pytest.mark.parametrize("seed", range(10))
def test_on_support_noiseless_truth(seed):
    obs = synthesize(20, 3, 4, 0.0, seed)
    S = SupportEstimate(tuple(int(i) for i in obs.truth.pi_star.support()), 0.0)
    pi = recover_permutation_on_support(obs.X, obs.y, S, obs.truth.beta_star)
    np.testing.assert_allclose(obs.y, apply_permutation(pi, obs.X @ obs.truth.beta_star), atol=1e-14)
    outside = np.setdiff1d(np.arange(20), S.indices)
    np.testing.assert_array_equal(pi.map[outside], outside)


def test_two_stage_k0():
    obs = synthesize(30, 3, 0, 0.1, 0)
    res = two_stage(obs.X, obs.y, 0, SimulationRule(0.1))
    np.testing.assert_allclose(res.refit_beta, fit_ols(obs.X, obs.y).beta)
    assert res.pi_tilde == SparsePermutation.identity(30)


@pytest.mark.parametrize("seed", range(10))
def test_two_stage_noiseless(seed):
    obs = synthesize(50, 2, 5, 0.0, seed)
    res = two_stage(obs.X, obs.y, 5, FixedLambda(1e-4))
    np.testing.assert_allclose(res.refit_beta, obs.truth.beta_star, atol=1e-8)
    assert set(res.support.indices) == set(int(i) for i in obs.truth.pi_star.support())
    assert res.pi_tilde == obs.truth.pi_star


def test_two_stage_high_snr_permutation_recovery():
    hits = 0
    for seed in range(100):
        obs = synthesize(100, 1, 10, 1e-4, seed)
        res = two_stage(obs.X, obs.y, 10, SimulationRule(1e-4))
        hits += res.pi_tilde == obs.truth.pi_star
    assert hits >= 95


def test_two_stage_precondition():
    with pytest.raises(InsufficientDataError):
        two_stage(np.ones((5, 3)), np.ones(5), 2, 0.1)
