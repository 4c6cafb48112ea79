"""Estimators of the regression coefficients (and, at small n, the permutation).

The central one is :func:`fit_robust`, which solves

    min_{beta, e}  (1/n) ||y - X beta - sqrt(n) e||^2 + lam ||e||_1

where ``sqrt(n) e`` absorbs the gross errors produced by mismatched rows.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
from scipy import linalg

from .errors import BudgetError, DimensionError, ParameterError, SingularDesignError
from .model import SparsePermutation, check_design

HUBER_C = 1.345
MAX_EXACT_N = 12


@dataclass(frozen=True)
class OlsFit:
    beta: np.ndarray
    residuals: np.ndarray
    rss: float


@dataclass(frozen=True)
class RobustFit:
    beta: np.ndarray
    e: np.ndarray
    lam: float
    iterations: int
    converged: bool
    objective_trace: List[float] = field(repr=False)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


@dataclass(frozen=True)
class ExactFit:
    pi: SparsePermutation
    beta: np.ndarray
    objective: float
    candidates_evaluated: int


# Lambda rules.  Each knows how to produce a positive lambda for sample size n.

def _positive(name, value):
    if not value > 0 or not math.isfinite(value):
        raise ParameterError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class TheoremRule:
    """``4 (1 + M) sigma sqrt(2 log(n) / n)``, the rate-optimal choice."""

    M: float
    sigma: float

    def value(self, n: int) -> float:
        _positive("M", self.M)
        _positive("sigma", self.sigma)
        return 4.0 * (1.0 + self.M) * self.sigma * math.sqrt(2.0 * math.log(n) / n)


@dataclass(frozen=True)
class SimulationRule:
    """``0.2 sigma sqrt(log(n) / n)``."""

    sigma: float

    def value(self, n: int) -> float:
        _positive("sigma", self.sigma)
        return 0.2 * self.sigma * math.sqrt(math.log(n) / n)


@dataclass(frozen=True)
class HuberRule:
    """``2 c sigma_hat / sqrt(n)``: matches Huber regression with tuning constant ``c``."""

    sigma_hat: float
    c: float = HUBER_C

    def value(self, n: int) -> float:
        _positive("sigma_hat", self.sigma_hat)
        _positive("c", self.c)
        return 2.0 * self.c * self.sigma_hat / math.sqrt(n)


@dataclass(frozen=True)
class FixedLambda:
    lam: float

    def value(self, n: int) -> float:
        _positive("lambda", self.lam)
        return float(self.lam)


LambdaRule = Union[TheoremRule, SimulationRule, HuberRule, FixedLambda]


def lambda_value(rule: Union[LambdaRule, float], n: int) -> float:
    if n < 2:
        raise DimensionError(f"lambda rules need n >= 2, got {n}")
    if isinstance(rule, (int, float)):
        rule = FixedLambda(float(rule))
    return rule.value(n)


def robust_scale(r) -> float:
    """Normal-consistent MAD: ``1.4826 * median(|r - median(r)|)``."""
    r = np.asarray(r, dtype=float)
    return 1.4826 * float(np.median(np.abs(r - np.median(r))))


class LeastSquares:
    """Thin QR factorization of a full-column-rank design, reused across solves."""

    def __init__(self, X):
        X = check_design(X)
        n, d = X.shape
        if n < d:
            raise SingularDesignError(f"n={n} < d={d}: design cannot have full column rank")
        Q, R = linalg.qr(X, mode="economic")
        diag = np.abs(np.diag(R))
        tol = max(n, d) * np.finfo(float).eps * diag.max() if diag.size else 0.0
        if diag.max() == 0 or np.any(diag <= tol):
            raise SingularDesignError("design matrix is rank deficient")
        self.X, self.Q, self.R = X, Q, R

    def solve(self, y) -> np.ndarray:
        """Coefficients minimizing ``||y - X b||``; ``y`` may be ``(n,)`` or ``(n, m)``."""
        return linalg.solve_triangular(self.R, self.Q.T @ y)

    def project_out(self, y) -> np.ndarray:
        """Residual of the orthogonal projection onto range(X), column-wise."""
        return y - self.Q @ (self.Q.T @ y)


def fit_ols(X, y) -> OlsFit:
    ls = LeastSquares(X)
    y = _check_response(ls.X, y)
    beta = ls.solve(y)
    r = y - ls.X @ beta
    return OlsFit(beta, r, float(r @ r))


def _check_response(X, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    return y


def soft_threshold(z, tau):
    """``sign(z) * max(|z| - tau, 0)``, elementwise."""
    if np.any(np.asarray(tau) < 0):
        raise ParameterError("threshold must be nonnegative")
    out = np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def robust_objective(X, y, beta, e, lam) -> float:
    n = X.shape[0]
    r = y - X @ beta - math.sqrt(n) * e
    return float(r @ r) / n + lam * float(np.abs(e).sum())


def fit_robust(
    X, y, lam, tol: float = 1e-10, max_iter: int = 10000, kkt_tol: float = 1e-7, accelerate: bool = True
) -> RobustFit:
    """Block coordinate descent on the (beta, e) objective.

    beta-step: least squares on ``y - sqrt(n) e`` (factorization cached).
    e-step: ``e = soft_threshold((y - X beta) / sqrt(n), lam / 2)``; the factor
    1/2 comes from the 1/n scaling of the quadratic term.

    One sweep of the two steps is a proximal-gradient step (step size 1/2) on
    the objective with beta profiled out, which crawls when ``lam`` is small
    compared with the noise.  With ``accelerate`` the e-step is taken from a
    Nesterov-extrapolated point; a sweep that would raise the objective is
    discarded and the momentum restarted, so the recorded objective never
    increases.  ``accelerate=False`` runs the plain alternation.

    Stops once the relative objective decrease falls below ``tol`` and the
    optimality residual is below ``kkt_tol * max(1, max|y|)``.  ``lam`` may be
    a float or a lambda rule.
    """
    ls = LeastSquares(X)
    X = ls.X
    y = _check_response(X, y)
    n, d = X.shape
    if n <= d:
        raise SingularDesignError(f"robust fit needs n > d, got n={n}, d={d}")
    lam = lambda_value(lam, n)
    sqn = math.sqrt(n)
    kkt_bound = kkt_tol * max(1.0, float(np.abs(y).max()))

    beta = ls.solve(y)
    e = np.zeros(n)
    obj = robust_objective(X, y, beta, e, lam)
    trace = [obj]
    v, beta_v, t = e, beta, 1.0
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        e_new = soft_threshold((y - X @ beta_v) / sqn, lam / 2.0)
        beta_new = ls.solve(y - sqn * e_new)
        obj_new = robust_objective(X, y, beta_new, e_new, lam)
        prev = obj
        if not accelerate or obj_new <= obj:
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0 if accelerate else 1.0
            v = e_new + ((t - 1.0) / t_next) * (e_new - e)
            e, beta, obj, t = e_new, beta_new, obj_new, t_next
            beta_v = ls.solve(y - sqn * v) if accelerate else beta
        else:
            v, beta_v, t = e, beta, 1.0
        trace.append(obj)
        if prev - obj <= tol * max(abs(prev), np.finfo(float).tiny):
            if _kkt(X, y, beta, e, lam) <= kkt_bound:
                converged = True
                break
    return RobustFit(beta, e, lam, it, converged, trace)


def _kkt(X, y, beta, e, lam) -> float:
    n = X.shape[0]
    sqn = math.sqrt(n)
    r = y - X @ beta - sqn * e
    grad_beta = np.max(np.abs(2.0 / n * (X.T @ r)))
    g = 2.0 / sqn * r
    viol = np.where(e != 0, np.abs(g - lam * np.sign(e)), np.maximum(np.abs(g) - lam, 0.0))
    return float(max(grad_beta, viol.max()))


def kkt_residual(fit: RobustFit, X, y) -> float:
    """Largest violation of the optimality conditions of the robust objective.

    Combines the beta-gradient ``(2/n) X^T r`` (sup norm) with, per
    coordinate, the distance of ``(2/sqrt(n)) r_i`` from ``lam * d|e_i|``,
    where ``r = y - X beta - sqrt(n) e``.
    """
    X = check_design(X)
    y = _check_response(X, y)
    n, d = X.shape
    if np.shape(fit.beta) != (d,) or np.shape(fit.e) != (n,):
        raise DimensionError("fit does not match the data dimensions")
    return _kkt(X, y, np.asarray(fit.beta), np.asarray(fit.e), fit.lam)


def fit_lad(X, y, smoothing: float = 1e-8, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """Least absolute deviations regression.

    IRLS with weights ``1 / max(|r|, smoothing)`` gets close to the optimum;
    IRLS can crawl near a degenerate vertex, so the result is finished by
    exact vertex exchanges (edge-wise weighted-median line searches).
    """
    X = check_design(X)
    y = _check_response(X, y)
    n, d = X.shape
    if n <= d:
        raise SingularDesignError(f"LAD needs n > d, got n={n}, d={d}")
    _positive("smoothing", smoothing)
    beta = fit_ols(X, y).beta
    for _ in range(max_iter):
        w = 1.0 / np.maximum(np.abs(y - X @ beta), smoothing)
        sw = np.sqrt(w)
        try:
            new = LeastSquares(X * sw[:, None]).solve(y * sw)
        except SingularDesignError:
            raise SingularDesignError("weighted LAD system is singular") from None
        done = np.linalg.norm(new - beta) <= tol * max(np.linalg.norm(beta), 1.0)
        beta = new
        if done:
            break
    return _lad_vertex_polish(X, y, beta)


def _weighted_median(values, weights) -> float:
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cw, 0.5 * cw[-1])])


def _lad_vertex_polish(X, y, beta, max_pivots: int = 0) -> np.ndarray:
    n, d = X.shape
    obj = lambda b: float(np.abs(y - X @ b).sum())
    active = np.argsort(np.abs(y - X @ beta), kind="stable")[:d]
    XA = X[active]
    if np.linalg.matrix_rank(XA) < d:
        return beta
    start = beta
    beta = np.linalg.solve(XA, y[active])
    f = obj(beta)
    max_pivots = max_pivots or 20 * n
    for _ in range(max_pivots):
        U = np.linalg.inv(X[active])  # column j moves off row active[j] only
        improved = False
        for j in range(d):
            u = U[:, j]
            a = X @ u
            r = y - X @ beta
            mask = np.abs(a) > 1e-14 * max(1.0, np.abs(a).max())
            t = _weighted_median(r[mask] / a[mask], np.abs(a[mask]))
            cand = beta + t * u
            fc = obj(cand)
            if fc < f - 1e-13 * max(1.0, f):
                idx = np.flatnonzero(mask)
                i_new = idx[np.argmin(np.abs(r[mask] / a[mask] - t))]
                trial = active.copy()
                trial[j] = i_new
                if np.linalg.matrix_rank(X[trial]) < d:
                    continue
                active = trial
                beta = np.linalg.solve(X[active], y[active])
                f = obj(beta)
                improved = True
                break
        if not improved:
            break
    return beta if f <= obj(start) else start


def _derangements(m: int):
    for p in itertools.permutations(range(m)):
        if all(p[i] != i for i in range(m)):
            yield p


def count_derangements(m: int) -> int:
    # D(0) = 1, D(1) = 0, D(m) = (m - 1) (D(m-1) + D(m-2))
    a, b = 1, 0
    if m == 0:
        return 1
    for i in range(2, m + 1):
        a, b = b, (i - 1) * (a + b)
    return b


def count_sparse_permutations(n: int, k: int) -> int:
    """``|{P : d_H(P, I) <= k}|`` for permutations of size ``n``."""
    return sum(math.comb(n, m) * count_derangements(m) for m in range(0, min(k, n) + 1))


def _sparse_permutation_maps(n: int, k: int):
    ident = np.arange(n)
    yield ident.copy()
    for m in range(2, min(k, n) + 1):
        ders = [np.array(p) for p in _derangements(m)]
        for supp in itertools.combinations(range(n), m):
            supp = np.array(supp)
            for p in ders:
                q = ident.copy()
                q[supp] = supp[p]
                yield q


def fit_exact_bruteforce(X, y, k: int, budget: int = 1_000_000) -> ExactFit:
    """Global least-squares fit over all permutations moving at most ``k`` rows.

    Profiles out beta: for each candidate ``Q`` the objective is the squared
    norm of ``Q y`` projected off range(X).  The returned ``pi`` satisfies
    ``y ~ pi(X beta)`` and equals ``Q^{-1}`` of the best candidate; among
    (numerically) tied optima the lexicographically smallest ``pi.map`` wins.
    """
    ls = LeastSquares(X)
    X = ls.X
    y = _check_response(X, y)
    n = X.shape[0]
    if n > MAX_EXACT_N:
        raise DimensionError(f"exhaustive search is limited to n <= {MAX_EXACT_N}, got n={n}")
    if k < 0 or k > n:
        raise DimensionError(f"k={k} outside [0, {n}]")
    total = count_sparse_permutations(n, k)
    if total > budget:
        raise BudgetError(f"{total} candidate permutations exceed the budget of {budget}")

    Qmaps = np.array(list(_sparse_permutation_maps(n, k)))
    objs = np.empty(len(Qmaps))
    chunk = 4096
    for start in range(0, len(Qmaps), chunk):
        Ys = y[Qmaps[start:start + chunk]].T
        R = ls.project_out(Ys)
        objs[start:start + chunk] = np.einsum("ij,ij->j", R, R)

    pis = np.argsort(Qmaps, axis=1)  # inverse permutations
    best = objs.min()
    tie_tol = 1e-12 * max(1.0, float(y @ y))
    tied = np.flatnonzero(objs <= best + tie_tol)
    order = np.lexsort(pis[tied].T[::-1])
    j = tied[order[0]]
    pi = SparsePermutation(pis[j])
    beta = ls.solve(y[Qmaps[j]])
    return ExactFit(pi, beta, float(objs[j]), len(Qmaps))


def fit_exact_d1_sorting(x, y):
    """Unconstrained least squares over all permutations for a single predictor.

    Returns ``(pi, beta)`` with ``y ~ beta * pi(x)``.  Both the increasing and
    the decreasing pairing of sorted ``x`` with sorted ``y`` are tried; the one
    with the smaller residual sum of squares wins (increasing on ties).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise DimensionError("empty input")
    if y.size != n:
        raise DimensionError(f"x has {n} entries, y has {y.size}")
    xx = float(x @ x)
    if xx == 0:
        raise SingularDesignError("predictor is identically zero")
    ox = np.argsort(x, kind="stable")
    oy = np.argsort(y, kind="stable")

    best = None
    for src in (ox, ox[::-1]):
        m = np.empty(n, dtype=np.intp)
        m[oy] = src
        ip = float(x[m] @ y)
        beta = ip / xx
        rss = float(y @ y) - ip * ip / xx
        if best is None or rss < best[2]:
            best = (m, beta, rss)
    return SparsePermutation(best[0]), best[1]
