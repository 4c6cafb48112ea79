"""Two-stage estimation: robust fit, support estimate, refit, sorted matching.

Recovered permutations follow the model convention: the returned ``pi``
satisfies ``y ~ pi(X theta)``, i.e. response ``i`` is paired with the fitted
value of row ``pi.map[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DimensionError, InsufficientDataError
from .model import SparsePermutation, check_design
from .solvers import (
    LambdaRule,
    OlsFit,
    RobustFit,
    fit_ols,
    fit_robust,
)

TOP_K = "TopK"
PI_DIAGONAL = "PiDiagonal"
THRESHOLD = "Threshold"


@dataclass(frozen=True)
class SupportEstimate:
    indices: Tuple[int, ...]
    threshold: float
    method: str = TOP_K

    def __len__(self):
        return len(self.indices)

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.indices)] = True
        return m


@dataclass(frozen=True)
class TwoStageResult:
    robust: RobustFit
    support: SupportEstimate
    refit_beta: np.ndarray
    pi_tilde: SparsePermutation


def estimate_support_topk(e, k: int) -> SupportEstimate:
    """Rows with the ``k`` largest ``|e_i|`` (smaller index first on ties).

    Zero entries are never selected, so fewer than ``k`` rows are returned when
    ``e`` has fewer than ``k`` nonzeros.
    """
    a = np.abs(np.asarray(e, dtype=float))
    n = a.size
    if k < 0 or k > n:
        raise DimensionError(f"k={k} outside [0, {n}]")
    if k == 0:
        return SupportEstimate((), 0.0, TOP_K)
    order = np.argsort(-a, kind="stable")[:k]
    threshold = float(a[order[-1]])
    chosen = order[a[order] > 0]
    return SupportEstimate(tuple(sorted(int(i) for i in chosen)), threshold, TOP_K)


def estimate_support_mad(e, multiplier: float = 3.0) -> SupportEstimate:
    """Data-driven support for unknown ``k``: ``|e_i| > multiplier * MAD(e)``.

    An extension for when the number of mismatches is not known.
    """
    e = np.asarray(e, dtype=float)
    t = multiplier * float(np.median(np.abs(e - np.median(e))))
    idx = np.flatnonzero(np.abs(e) > t)
    return SupportEstimate(tuple(int(i) for i in idx), t, THRESHOLD)


def support_from_permutation(pi: SparsePermutation) -> SupportEstimate:
    return SupportEstimate(tuple(int(i) for i in pi.support()), 0.0, PI_DIAGONAL)


def refit_excluding(X, y, support: SupportEstimate) -> OlsFit:
    """OLS on the rows outside ``support``.

    The returned residuals cover the retained rows only.
    """
    X = check_design(X)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    keep = ~support.mask(n)
    if keep.sum() <= d:
        raise InsufficientDataError(
            f"{int(keep.sum())} rows remain after excluding {len(support)}, need more than d={d}"
        )
    return fit_ols(X[keep], y[keep])


def _sorted_matching(fitted: np.ndarray, y: np.ndarray) -> np.ndarray:
    # rank-r response is paired with rank-r fitted value
    m = np.empty(y.size, dtype=np.intp)
    m[np.argsort(y, kind="stable")] = np.argsort(fitted, kind="stable")
    return m


def recover_permutation_sorted(X, y, theta_hat) -> SparsePermutation:
    """Permutation maximizing ``<pi(X theta_hat), y>`` over all permutations."""
    X = check_design(X)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    return SparsePermutation(_sorted_matching(X @ np.asarray(theta_hat, dtype=float), y))


def recover_permutation_on_support(X, y, support: SupportEstimate, theta_hat) -> SparsePermutation:
    """Sorted matching restricted to ``support``; identity elsewhere."""
    X = check_design(X)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    perm = np.arange(n)
    S = np.array(sorted(support.indices), dtype=np.intp)
    if S.size:
        fitted = X[S] @ np.asarray(theta_hat, dtype=float)
        perm[S] = S[_sorted_matching(fitted, y[S])]
    return SparsePermutation(perm)


def two_stage(
    X,
    y,
    k: int,
    rule: Union[LambdaRule, float],
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> TwoStageResult:
    """Robust fit, drop the top-``k`` rows by ``|e|``, refit, then match on the dropped rows."""
    X = check_design(X)
    n, d = X.shape
    if n - k <= d:
        raise InsufficientDataError(f"n - k = {n - k} must exceed d = {d}")
    robust = fit_robust(X, y, rule, tol=tol, max_iter=max_iter)
    support = estimate_support_topk(robust.e, k)
    refit = refit_excluding(X, y, support)
    pi = recover_permutation_on_support(X, y, support, refit.beta)
    return TwoStageResult(robust, support, refit.beta, pi)
