"""Sparsely permuted linear regression model: permutations, data generation.

Observations follow ``y = P X beta + sigma * eps`` where ``P`` is a permutation
matrix moving at most ``k`` of the ``n`` rows.  A permutation is stored as an
index map with ``(P v)[i] = v[map[i]]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, InfeasibleSparsityError, ParameterError

UINT64_MASK = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class SparsePermutation:
    """A bijection on ``{0, ..., n-1}``.

    ``map[i]`` is the source index of position ``i``: applying the permutation
    to ``v`` gives ``v[map]``.
    """

    map: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.map)
        if m.ndim != 1 or m.size == 0:
            raise DimensionError("permutation map must be a non-empty 1-d array")
        if not np.issubdtype(m.dtype, np.integer):
            if not np.all(np.equal(np.mod(m, 1), 0)):
                raise DimensionError("permutation map must contain integers")
        m = m.astype(np.intp)
        if not np.array_equal(np.sort(m), np.arange(m.size)):
            raise DimensionError("permutation map is not a bijection on [n]")
        m.setflags(write=False)
        object.__setattr__(self, "map", m)

    @classmethod
    def identity(cls, n: int) -> "SparsePermutation":
        if n < 1:
            raise DimensionError(f"n must be positive, got {n}")
        return cls(np.arange(n))

    @property
    def n(self) -> int:
        return int(self.map.size)

    def support(self) -> np.ndarray:
        """Sorted indices moved by the permutation."""
        return np.flatnonzero(self.map != np.arange(self.n))

    def hamming(self) -> int:
        """Number of non-fixed points, i.e. the Hamming distance to the identity."""
        return int(np.count_nonzero(self.map != np.arange(self.n)))

    def inverse(self) -> "SparsePermutation":
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(self.n)
        return SparsePermutation(inv)

    def compose(self, other: "SparsePermutation") -> "SparsePermutation":
        """Matrix product ``self @ other``: apply ``other`` first."""
        if other.n != self.n:
            raise DimensionError("cannot compose permutations of different sizes")
        return SparsePermutation(other.map[self.map])

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.n, self.n))
        P[np.arange(self.n), self.map] = 1.0
        return P

    def __eq__(self, other):
        if not isinstance(other, SparsePermutation):
            return NotImplemented
        return np.array_equal(self.map, other.map)

    def __hash__(self):
        return hash(self.map.tobytes())

    def __repr__(self):
        if self.n <= 20:
            return f"SparsePermutation({self.map.tolist()})"
        return f"SparsePermutation(n={self.n}, hamming={self.hamming()})"


@dataclass(frozen=True)
class GroundTruth:
    beta_star: np.ndarray
    pi_star: SparsePermutation
    sigma: float


@dataclass(frozen=True)
class ObservationSet:
    X: np.ndarray
    y: np.ndarray
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        X = check_design(self.X)
        y = np.asarray(self.y, dtype=float)
        if y.shape != (X.shape[0],):
            raise DimensionError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if self.truth is not None:
            if self.truth.beta_star.shape != (X.shape[1],):
                raise DimensionError("beta_star length does not match X")
            if self.truth.pi_star.n != X.shape[0]:
                raise DimensionError("pi_star size does not match X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SimulationSpec:
    """A (sigma, k/n) grid of Monte-Carlo experiments."""

    n: int = 200
    d: int = 10
    k_fractions: Sequence[float] = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
    sigmas: Sequence[float] = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
    replications: int = 100
    base_seed: int = 0
    beta_rule: str = "UnitSphereUniform"

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DimensionError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if self.replications < 1:
            raise ParameterError("replications must be at least 1")
        for kf in self.k_fractions:
            if not 0.0 <= kf <= 1.0:
                raise ParameterError(f"k fraction {kf} outside [0, 1]")
        for s in self.sigmas:
            if not s > 0:
                raise ParameterError(f"sigma must be positive, got {s}")
        if self.beta_rule != "UnitSphereUniform":
            raise ParameterError(f"unknown beta rule {self.beta_rule!r}")
        object.__setattr__(self, "k_fractions", tuple(float(v) for v in self.k_fractions))
        object.__setattr__(self, "sigmas", tuple(float(v) for v in self.sigmas))


def check_design(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"design must be a non-empty n x d matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DimensionError("design contains non-finite entries")
    return X


def replication_seed(base_seed: int, r: int) -> int:
    """Seed of the random stream used by replication ``r``."""
    return (int(base_seed) ^ int(r)) & UINT64_MASK


def k_from_fraction(k_fraction: float, n: int) -> int:
    """Number of mismatches for a fraction of ``n``, never equal to 1."""
    k = int(np.floor(k_fraction * n + 0.5))
    k = min(max(k, 0), n)
    if k == 1:
        warnings.warn(f"k/n={k_fraction} gives k=1 at n={n}; using k=2", stacklevel=2)
        k = 2 if n >= 2 else 0
    return k


def generate_design(n: int, d: int, seed: int) -> np.ndarray:
    """``n x d`` matrix of independent standard normal entries."""
    if n < 1 or d < 1:
        raise DimensionError(f"n and d must be positive, got n={n}, d={d}")
    return np.random.default_rng(seed).standard_normal((n, d))


def sample_unit_sphere(d: int, seed: int) -> np.ndarray:
    if d < 1:
        raise DimensionError(f"d must be positive, got {d}")
    rng = np.random.default_rng(seed)
    while True:
        g = rng.standard_normal(d)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm


def sample_sparse_permutation(n: int, k: int, seed: int) -> SparsePermutation:
    """Permutation moving exactly ``k`` indices.

    The support is a uniform ``k``-subset; within it the permutation is a
    uniform derangement (rejection sampling).
    """
    if n < 1:
        raise DimensionError(f"n must be positive, got {n}")
    if k < 0 or k > n:
        raise DimensionError(f"k={k} outside [0, {n}]")
    if k == 1:
        raise InfeasibleSparsityError("a permutation cannot move exactly one index")
    rng = np.random.default_rng(seed)
    perm = np.arange(n)
    if k == 0:
        return SparsePermutation(perm)
    support = np.sort(rng.choice(n, size=k, replace=False))
    while True:
        sigma = rng.permutation(k)
        if not np.any(sigma == np.arange(k)):
            break
    perm[support] = support[sigma]
    return SparsePermutation(perm)


def apply_permutation(pi: SparsePermutation, v) -> np.ndarray:
    """``(P v)[i] = v[pi.map[i]]``; works row-wise for 2-d ``v``."""
    v = np.asarray(v)
    if v.shape[0] != pi.n:
        raise DimensionError(f"vector of length {v.shape[0]} for permutation of size {pi.n}")
    return v[pi.map]


def synthesize(
    n: int,
    d: int,
    k: int,
    sigma: float,
    seed: int,
    beta_star: Optional[np.ndarray] = None,
) -> ObservationSet:
    """Draw one data set ``y = P* X beta* + sigma * eps``.

    Independent child streams are used for the design, ``beta*``, the
    permutation and the noise, so e.g. two calls differing only in ``sigma``
    share ``X``, ``beta*`` and ``P*``.
    """
    if sigma < 0:
        raise ParameterError(f"sigma must be nonnegative, got {sigma}")
    s_design, s_beta, s_perm, s_noise = (
        int(s) for s in np.random.SeedSequence(int(seed) & UINT64_MASK).generate_state(4, dtype=np.uint64)
    )
    X = generate_design(n, d, s_design)
    if beta_star is None:
        beta = sample_unit_sphere(d, s_beta)
    else:
        beta = np.asarray(beta_star, dtype=float)
        if beta.shape != (d,):
            raise DimensionError(f"beta_star has shape {beta.shape}, expected ({d},)")
    pi = sample_sparse_permutation(n, k, s_perm)
    noise = np.random.default_rng(s_noise).standard_normal(n)
    y = apply_permutation(pi, X @ beta) + sigma * noise
    return ObservationSet(X, y, GroundTruth(beta, pi, float(sigma)))


def snr(beta_star, sigma: float) -> float:
    """Signal-to-noise ratio ``||beta*||^2 / sigma^2``."""
    if sigma == 0:
        raise ZeroDivisionError("SNR is undefined for sigma = 0")
    if sigma < 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    b = np.asarray(beta_star, dtype=float)
    return float(b @ b) / sigma**2
