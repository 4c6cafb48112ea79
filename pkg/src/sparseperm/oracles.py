"""Slow, independent reference solvers used to cross-check the fast paths."""
from __future__ import annotations

import itertools
import math

import numpy as np


def exhaustive_lsq(X, y, k: int):
    """Minimize ``||P X b - y||^2`` over every permutation ``P`` with at most ``k`` moves.

    Walks all ``n!`` permutations, discards those moving more than ``k`` rows,
    permutes the rows of ``X`` and solves the normal equations directly.
    Returns ``(objective, perm_map, beta)`` for the first optimum found.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    perms = np.array(
        [p for p in itertools.permutations(range(n)) if sum(p[i] != i for i in range(n)) <= k]
    )
    Xp = X[perms]                                 # (P, n, d)
    G = np.einsum("pni,pnj->pij", Xp, Xp)
    b = np.einsum("pni,n->pi", Xp, y)
    beta = np.linalg.solve(G, b[..., None])[..., 0]
    resid = np.einsum("pnd,pd->pn", Xp, beta) - y
    obj = np.einsum("pn,pn->p", resid, resid)
    j = int(np.argmin(obj))
    return float(obj[j]), perms[j], beta[j]


def max_inner_product_bruteforce(f, y):
    """``max_P <P f, y>`` over all permutations, with the maximizing map."""
    f = np.asarray(f, dtype=float)
    y = np.asarray(y, dtype=float)
    best, arg = -np.inf, None
    for p in itertools.permutations(range(f.size)):
        v = float(f[list(p)] @ y)
        if v > best:
            best, arg = v, np.array(p)
    return best, arg


def _huber_profile(X, y, beta, lam):
    # e profiled out of the robust objective, per row:
    # (r/sqrt n)^2 if |r/sqrt n| <= lam/2, else lam |r/sqrt n| - lam^2/4
    n = X.shape[0]
    z = (y - X @ beta) / math.sqrt(n)
    a = np.abs(z)
    quad = a <= lam / 2.0
    val = np.where(quad, z * z, lam * a - lam * lam / 4.0).sum()
    dz = np.where(quad, 2.0 * z, lam * np.sign(z))
    grad = -(X.T @ dz) / math.sqrt(n)
    return float(val), grad


def subgradient_robust(X, y, lam, max_iter: int = 200_000, gtol: float = 1e-13):
    """Minimize the robust objective by (sub)gradient steps on beta alone.

    ``e`` is eliminated in closed form, which leaves a Huber-type function of
    ``beta``.  Steps use Armijo backtracking.  Returns ``(objective, beta, e)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    beta = np.zeros(d)
    f, g = _huber_profile(X, y, beta, lam)
    step = 1.0
    for _ in range(max_iter):
        gg = float(g @ g)
        if math.sqrt(gg) < gtol:
            break
        step = min(step * 2.0, 1e6)
        while True:
            cand = beta - step * g
            fc, gc = _huber_profile(X, y, cand, lam)
            if fc <= f - 0.5 * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                break
        if step < 1e-20 or f - fc <= 1e-18 * max(1.0, abs(f)):
            if fc < f:
                beta, f, g = cand, fc, gc
            break
        beta, f, g = cand, fc, gc
    z = (y - X @ beta) / math.sqrt(n)
    e = np.sign(z) * np.maximum(np.abs(z) - lam / 2.0, 0.0)
    return f, beta, e


def lad_basic_solutions(X, y):
    """Exact LAD objective by enumerating fits interpolating ``d`` of the rows.

    Some LAD optimum always passes through ``d`` data points, so the minimum
    over all such interpolants is the global minimum.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    best, arg = np.inf, None
    for rows in itertools.combinations(range(n), d):
        A = X[list(rows)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        b = np.linalg.solve(A, y[list(rows)])
        v = float(np.abs(y - X @ b).sum())
        if v < best:
            best, arg = v, b
    return best, arg
