import math

import numpy as np
import pytest

import theory_oracle as ref
from sparseperm.errors import DimensionError, InfeasibleError, ParameterError
from sparseperm.theory import (
    BoundInputs,
    check_thm1_condition,
    compute_bounds,
    corollary_snr_threshold,
    gaussian_width_bound,
    nu,
    prop1_lower_bound,
    thm1_error_bound,
    thm1_violations,
    thm2_error_bound,
    thm3a_snr_threshold,
)


def rel(a, b):
    return abs(float(a) - float(b)) / max(1.0, abs(float(b)))


def test_width_examples():
    assert gaussian_width_bound(100, 2) == pytest.approx(3.5 * math.sqrt(4 * math.log(25 * math.e)), rel=1e-12)
    assert gaussian_width_bound(100, 2) == pytest.approx(14.378, abs=1e-3)
    assert gaussian_width_bound(64, 32) == pytest.approx(3.5 * 8.0, rel=1e-12)
    assert gaussian_width_bound(10, 0) == 0.0
    with pytest.raises(DimensionError):
        gaussian_width_bound(10, 6)


def test_width_monotone_in_k():
    vals = [gaussian_width_bound(1000, k) for k in range(1, 501)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_nu_examples():
    assert nu(1) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    assert nu(1) == pytest.approx(0.79788, abs=1e-5)
    assert nu(3) == pytest.approx(1.5958, abs=1e-4)
    with pytest.raises(DimensionError):
        nu(0)


def test_nu_bracket():
    m = np.arange(1, 10001)
    v = np.array([nu(int(i)) for i in m])
    assert np.all(v >= m / np.sqrt(m + 1)) and np.all(v <= np.sqrt(m))


def test_thm1_condition_examples():
    # at n=1e4 the width term times 2/(1-eps) (about 83) exceeds the left side (about 66.6)
    assert not check_thm1_condition(BoundInputs(10000, 10, 5, eps=0.25))
    lhs = float(ref.nu(9990) - ref.nu(10000) / 3)
    rhs = float(8 * ref.width(10000, 5) / 3)
    assert lhs == pytest.approx(66.615, abs=1e-3) and rhs == pytest.approx(82.997, abs=1e-3)
    assert check_thm1_condition(BoundInputs(100000, 10, 5, eps=0.25))
    assert not check_thm1_condition(BoundInputs(20, 10, 9, eps=0.45))
    with pytest.raises(DimensionError):
        BoundInputs(10, 10, 0)


def test_thm1_bound_against_oracle():
    inp = BoundInputs(100000, 10, 5, sigma=1.0, eps=0.25)
    assert rel(thm1_error_bound(inp), ref.thm1(100000, 10, 5, 1, 0.25)) <= 1e-12


def test_thm1_k0_second_term():
    n, d, eps = 100000, 10, 0.25
    inp = BoundInputs(n, d, 0, sigma=1.0, eps=eps)
    first = math.sqrt(5 * max(d, math.log(n)) / n)
    second = 2 * (1 + math.sqrt(2)) / eps**2 * math.log(n) / math.sqrt(n)
    pre = 1 / (1 - math.sqrt(max(4 * d, math.log(n)) / n))
    assert thm1_error_bound(inp) == pytest.approx(pre * (first + second), rel=1e-13)


def test_thm1_infeasible_names_clause():
    with pytest.raises(InfeasibleError, match="nu_"):
        thm1_error_bound(BoundInputs(200, 10, 20))
    assert thm1_violations(BoundInputs(20, 10, 9, eps=0.45))


def test_bounds_vanish_at_zero_sigma():
    inp = BoundInputs(100000, 10, 5, sigma=0.0)
    assert thm1_error_bound(inp) == 0.0
    assert thm2_error_bound(inp) == 0.0


def test_thm2_against_oracle_and_k0():
    inp = BoundInputs(10000, 10, 5, sigma=1.0, M=1.0, thm2_eps=0.1)
    assert rel(thm2_error_bound(inp), ref.thm2(10000, 10, 5, 1, 1, 0.1)) <= 1e-12
    k0 = BoundInputs(10000, 10, 0, sigma=1.0)
    assert thm2_error_bound(k0) == pytest.approx(
        math.sqrt(5 * max(10, math.log(10000)) / 10000) / (1 - math.sqrt(40 / 10000)), rel=1e-13
    )


def test_thm2_first_summand_shared_with_thm1():
    # with the second summands removed (k=0 for thm2, compare oracle pieces)
    n, d = 5000, 7
    a = thm2_error_bound(BoundInputs(n, d, 0))
    assert a == pytest.approx(float(ref._pre(n, d, 1) * ref._first(n, d)), rel=1e-12)


def test_thm2_c1_condition():
    with pytest.raises(InfeasibleError, match="c1"):
        thm2_error_bound(BoundInputs(100, 2, 60, c1=0.1))


def test_corollary_examples():
    assert corollary_snr_threshold(BoundInputs(10000, 10, 0)) == 0.0
    inp = BoundInputs(10000, 10, 5, eps=0.25, delta=0.05)
    assert rel(corollary_snr_threshold(inp), ref.corollary(10000, 5, 0.25, 0.05)) <= 1e-12
    t1 = corollary_snr_threshold(BoundInputs(10000, 10, 5))
    t2 = corollary_snr_threshold(BoundInputs(10000, 10, 10))
    w1, w2 = gaussian_width_bound(10000, 5), gaussian_width_bound(10000, 10)
    assert t2 / t1 == pytest.approx(4 * (w2 / w1) ** 2, rel=1e-12)


def test_thm3a_examples():
    expected = 25 * 16 / (4 * 0.01 * math.pi) * (2 * math.log(200)) ** 2
    assert thm3a_snr_threshold(5, 0.1, 0.0) == pytest.approx(expected, rel=1e-12)
    assert thm3a_snr_threshold(5, 0.1, 0.0) == pytest.approx(3.574e5, rel=1e-3)
    assert thm3a_snr_threshold(50, 0.05, math.sqrt(50)) > thm3a_snr_threshold(50, 0.05, 0.0)
    ratio = thm3a_snr_threshold(200, 0.05, 0) / thm3a_snr_threshold(100, 0.05, 0)
    log_ratio = (math.log(200 * 199 / 0.05) / math.log(100 * 99 / 0.05)) ** 2
    assert ratio / log_ratio == pytest.approx(16, rel=0.02)
    with pytest.raises(ParameterError):
        thm3a_snr_threshold(5, 1.5, 0)


def test_prop1_examples():
    assert prop1_lower_bound(10, 1, 0.0) == 0.0
    assert prop1_lower_bound(500, 1, 1.0) == pytest.approx(1.5816e-3, abs=1e-7)
    assert prop1_lower_bound(10**9, 1, 1.0) == pytest.approx(1 / (64 * math.pi**2), rel=1e-8)
    assert 1 / (64 * math.pi**2) == pytest.approx(1.583e-3, abs=1e-6)


def test_sigma_homogeneity():
    a = BoundInputs(100000, 10, 5, sigma=1.0)
    b = BoundInputs(100000, 10, 5, sigma=3.0)
    assert thm1_error_bound(b) == pytest.approx(3 * thm1_error_bound(a), rel=1e-14)
    assert thm2_error_bound(b) == pytest.approx(3 * thm2_error_bound(a), rel=1e-14)
    assert corollary_snr_threshold(b) == corollary_snr_threshold(a)


def test_compute_bounds_reports_infeasible_as_none():
    rep = compute_bounds(BoundInputs(200, 10, 20))
    assert rep.thm1_error_bound is None and not rep.thm1_condition_ok
    assert rep.thm2_error_bound is not None and rep.width_bound > 0
    assert rep.thm3b_snr_scale == 200**2
    assert "thm1_error_bound" in rep.as_dict()["notes"]


def test_bound_inputs_validation():
    with pytest.raises(ParameterError):
        BoundInputs(100, 2, 3, eps=0.7)
    with pytest.raises(DimensionError):
        BoundInputs(100, 2, 101)
