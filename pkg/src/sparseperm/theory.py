"""Closed-form error bounds and SNR thresholds for sparsely permuted regression.

The constants ``c1`` and ``thm2_eps`` entering :func:`thm2_error_bound` are
only known to exist; their defaults make the output an order-of-magnitude
diagnostic rather than a certified bound.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from scipy.special import poch

from .errors import DimensionError, InfeasibleError, ParameterError


@dataclass(frozen=True)
class BoundInputs:
    n: int
    d: int
    k: int
    sigma: float = 1.0
    eps: float = 0.25
    M: float = 1.0
    delta: float = 0.05
    Delta: float = 0.0
    thm2_eps: float = 0.1
    c1: float = 1.0

    def __post_init__(self):
        if not self.n > self.d >= 1:
            raise DimensionError(f"need n > d >= 1, got n={self.n}, d={self.d}")
        if not 0 <= self.k <= self.n:
            raise DimensionError(f"k={self.k} outside [0, {self.n}]")
        if self.sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        if not 0 < self.eps < 0.5:
            raise ParameterError(f"eps must lie in (0, 1/2), got {self.eps}")
        if not self.M > 0:
            raise ParameterError("M must be positive")
        if not 0 < self.delta < 1:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if self.Delta < 0:
            raise ParameterError("Delta must be nonnegative")
        if not self.thm2_eps > 0 or not self.c1 > 0:
            raise ParameterError("thm2_eps and c1 must be positive")


@dataclass
class BoundReport:
    width_bound: Optional[float]
    nu_n: float
    nu_n_minus_d: float
    thm1_condition_ok: bool
    thm1_error_bound: Optional[float]
    thm2_error_bound: Optional[float]
    corollary_snr_threshold: Optional[float]
    thm3a_snr_threshold: float
    thm3b_snr_scale: float
    prop1_lower_bound: float
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["notes"] = "; ".join(self.notes)
        return out


def gaussian_width_bound(n: int, k: int) -> float:
    """Upper bound ``3.5 sqrt(2k log(e n / 2k))`` on the width of 2k-sparse unit vectors.

    Defined as 0 for ``k = 0``.
    """
    if k == 0:
        return 0.0
    if k < 0 or 2 * k > n:
        raise DimensionError(f"width bound needs 0 <= 2k <= n, got n={n}, k={k}")
    return 3.5 * math.sqrt(2 * k * (1.0 + math.log(n / (2 * k))))


def nu(m: int) -> float:
    """Expected Euclidean norm of a standard Gaussian vector in R^m."""
    if m < 1:
        raise DimensionError(f"m must be a positive integer, got {m}")
    # Gamma((m+1)/2) / Gamma(m/2) as a Pochhammer symbol; differencing lgamma
    # values loses about seven digits once m reaches the millions
    return math.sqrt(2.0) * float(poch(m / 2.0, 0.5))


def _width_or_log(inp: BoundInputs) -> float:
    return max(gaussian_width_bound(inp.n, inp.k), math.log(inp.n))


def _oracle_term(n: int, d: int) -> float:
    return math.sqrt(5.0 * max(d, math.log(n)) / n)


def _prefactor(inp: BoundInputs) -> float:
    n, d = inp.n, inp.d
    return inp.sigma / (1.0 - math.sqrt(max(4 * d, math.log(n)) / n))


def _check_dims(inp: BoundInputs):
    if inp.d >= inp.n:
        raise DimensionError(f"need d < n, got n={inp.n}, d={inp.d}")


def thm1_violations(inp: BoundInputs) -> List[str]:
    """Names of the unsatisfied clauses of the exact-estimator error bound."""
    _check_dims(inp)
    out = []
    n, d, eps = inp.n, inp.d, inp.eps
    if 2 * inp.k > n:
        out.append(f"2k <= n (k={inp.k}, n={n})")
        return out
    lhs = nu(n - d) - eps / (1.0 - eps) * nu(n)
    rhs = 2.0 / (1.0 - eps) * gaussian_width_bound(n, inp.k)
    if not lhs >= rhs:
        out.append(f"nu_(n-d) - eps/(1-eps) nu_n >= 2/(1-eps) w(T) ({lhs:.6g} < {rhs:.6g})")
    if not n > max(9, 4 * d):
        out.append(f"n > max(9, 4d) (n={n}, d={d})")
    return out


def check_thm1_condition(inp: BoundInputs) -> bool:
    return not thm1_violations(inp)


def thm1_error_bound(inp: BoundInputs) -> float:
    """Error bound for the exact (combinatorial) least-squares estimator."""
    bad = thm1_violations(inp)
    n, d = inp.n, inp.d
    if not 4 * max(d, math.log(n)) < n:
        bad.append(f"4 max(d, log n) < n (n={n}, d={d})")
    if bad:
        raise InfeasibleError("violated: " + "; ".join(bad))
    excess = 2.0 * (1.0 + math.sqrt(2.0)) * inp.eps**-2 * _width_or_log(inp) / math.sqrt(n)
    return _prefactor(inp) * (_oracle_term(n, d) + excess)


def thm2_error_bound(inp: BoundInputs) -> float:
    """Error bound for the convex robust estimator with lambda = 4 (1 + M) sigma sqrt(2 log(n) / n)."""
    _check_dims(inp)
    n, d, k = inp.n, inp.d, inp.k
    bad = []
    if not 4 * max(d, math.log(n)) < n:
        bad.append(f"4 max(d, log n) < n (n={n}, d={d})")
    if 0 < k < n and not k <= inp.c1 * (n - d) / math.log(n / k):
        bad.append(f"k <= c1 (n - d) / log(n/k) (k={k}, c1={inp.c1})")
    if k == n:
        bad.append("k < n")
    if bad:
        raise InfeasibleError("violated: " + "; ".join(bad))
    excess = 48.0 * (1.0 + inp.M) * n / (n - d) / inp.thm2_eps * math.sqrt(2.0 * k * math.log(n) / n)
    return _prefactor(inp) * (_oracle_term(n, d) + excess)


def corollary_snr_threshold(inp: BoundInputs) -> float:
    """SNR above which the exact estimator identifies the mismatched rows."""
    if 2 * inp.k > inp.n:
        raise InfeasibleError(f"width bound undefined for 2k > n (k={inp.k}, n={inp.n})")
    c = 2.0 * (1.0 + math.sqrt(2.0)) ** 2 * inp.eps**-4 / inp.delta**2
    return c * inp.k**2 * _width_or_log(inp) ** 2 / inp.n


def thm3a_snr_threshold(n: int, delta: float, Delta: float) -> float:
    """SNR sufficient for sorted matching with ``||X(theta - beta*)||_inf <= sigma * Delta``."""
    if n < 2:
        raise DimensionError(f"n must be at least 2, got {n}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if Delta < 0:
        raise ParameterError("Delta must be nonnegative")
    m = n * (n - 1)
    return m**2 / (4.0 * delta**2 * math.pi) * (Delta + 2.0 * math.log(m / delta)) ** 2


def prop1_lower_bound(n: int, d: int, sigma: float) -> float:
    """Lower bound on ``||beta_hat||^2`` of unconstrained least squares on pure noise."""
    if n < 1:
        raise DimensionError(f"n must be positive, got {n}")
    return n / (2.0 * n + d) * sigma**2 / (32.0 * math.pi**2)


def compute_bounds(inp: BoundInputs) -> BoundReport:
    """Evaluate every calculator, recording infeasible ones as ``None`` with a note."""
    notes = []

    def attempt(fn, label):
        try:
            return fn(inp)
        except (InfeasibleError, DimensionError) as exc:
            notes.append(f"{label}: {exc}")
            return None

    width = attempt(lambda i: gaussian_width_bound(i.n, i.k), "width_bound")
    ok = check_thm1_condition(inp)
    return BoundReport(
        width_bound=width,
        nu_n=nu(inp.n),
        nu_n_minus_d=nu(inp.n - inp.d),
        thm1_condition_ok=ok,
        thm1_error_bound=attempt(thm1_error_bound, "thm1_error_bound"),
        thm2_error_bound=attempt(thm2_error_bound, "thm2_error_bound"),
        corollary_snr_threshold=attempt(corollary_snr_threshold, "corollary_snr_threshold"),
        thm3a_snr_threshold=thm3a_snr_threshold(inp.n, inp.delta, inp.Delta),
        thm3b_snr_scale=float(inp.n) ** 2,
        prop1_lower_bound=prop1_lower_bound(inp.n, inp.d, inp.sigma),
        notes=notes,
    )
