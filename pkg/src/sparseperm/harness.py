"""Monte-Carlo experiments comparing estimators on synthetic mismatched data.

Every replication draws its data from its own seed (``base_seed ^ r``), so
trials are independent tasks and serial and parallel runs agree exactly.
Cells with different ``(sigma, k/n)`` reuse the replication seed, which gives
common random numbers (same design and coefficients) across the grid.
"""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, InsufficientDataError, ParameterError
from .model import (
    GroundTruth,
    SimulationSpec,
    SparsePermutation,
    apply_permutation,
    k_from_fraction,
    replication_seed,
    sample_unit_sphere,
    synthesize,
)
from .recovery import recover_permutation_sorted, two_stage
from .solvers import (
    MAX_EXACT_N,
    SimulationRule,
    fit_exact_bruteforce,
    fit_exact_d1_sorting,
    fit_ols,
    fit_robust,
)
from .theory import prop1_lower_bound

WORKERS_ENV = "SPARSEPERM_WORKERS"
GRID_ESTIMATORS = ("naive", "robust", "refit", "oracle")
CSV_COLUMNS = ("sigma", "k_fraction", "estimator", "mean_log2_l2_error", "std_error", "reps")
PLOT_COLUMNS = ("estimator", "sigma", "k_fraction", "mean_log2_l2_error", "mean_l2_error")
_LOG2_FLOOR = 1e-300


@dataclass
class TrialMetrics:
    l2_error_naive: float
    l2_error_robust: float
    l2_error_refit: float
    l2_error_oracle: float
    support_precision: float
    support_recall: float
    permutation_exact: bool
    permutation_hamming_error: int
    wall_time_ms: float
    robust_converged: bool = True


@dataclass
class GridCellSummary:
    sigma: float
    k_fraction: float
    k: int
    replications: int
    mean_log2_errors: Dict[str, float]
    std_errors: Dict[str, float]
    mean_errors: Dict[str, float] = field(default_factory=dict)
    errors: Dict[str, Tuple[float, ...]] = field(default_factory=dict, repr=False)
    extras: Dict[str, float] = field(default_factory=dict)
    skipped: Optional[str] = None

    @property
    def estimators(self) -> Tuple[str, ...]:
        return tuple(self.mean_log2_errors)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        w = int(raw)
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(w, 1)


def _map(fn, tasks: Sequence, workers: Optional[int]) -> List:
    workers = default_workers() if workers is None else max(int(workers), 1)
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves task order, so the merge is deterministic
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _l2(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def oracle_ols(X, y, truth: GroundTruth):
    """OLS after undoing the true permutation."""
    return fit_ols(X, apply_permutation(truth.pi_star.inverse(), y))


def evaluate_permutation(pi_est: SparsePermutation, truth: GroundTruth) -> Tuple[bool, int]:
    """(exact recovery, number of positions where the two maps disagree)."""
    if pi_est.n != truth.pi_star.n:
        raise DimensionError(f"permutation sizes differ: {pi_est.n} vs {truth.pi_star.n}")
    ham = int(np.count_nonzero(pi_est.map != truth.pi_star.map))
    return ham == 0, ham


def run_trial(task) -> TrialMetrics:
    n, d, k, sigma, seed = task
    t0 = time.perf_counter()
    obs = synthesize(n, d, k, sigma, seed)
    X, y, truth = obs.X, obs.y, obs.truth
    beta = truth.beta_star

    naive = fit_ols(X, y).beta
    ts = two_stage(X, y, k, SimulationRule(sigma))
    oracle = oracle_ols(X, y, truth).beta

    est = set(ts.support.indices)
    true = set(int(i) for i in truth.pi_star.support())
    hit = len(est & true)
    exact, ham = evaluate_permutation(ts.pi_tilde, truth)
    return TrialMetrics(
        l2_error_naive=_l2(naive, beta),
        l2_error_robust=_l2(ts.robust.beta, beta),
        l2_error_refit=_l2(ts.refit_beta, beta),
        l2_error_oracle=_l2(oracle, beta),
        support_precision=hit / len(est) if est else 1.0,
        support_recall=hit / len(true) if true else 1.0,
        permutation_exact=exact,
        permutation_hamming_error=ham,
        wall_time_ms=1000.0 * (time.perf_counter() - t0),
        robust_converged=ts.robust.converged,
    )


def _summarize(sigma, kf, k, errors: Dict[str, List[float]], extras=None) -> GridCellSummary:
    reps = len(next(iter(errors.values())))
    mean_log2, se, mean_raw = {}, {}, {}
    for name, vals in errors.items():
        v = np.asarray(vals, dtype=float)
        lg = np.log2(np.maximum(v, _LOG2_FLOOR))
        mean_log2[name] = float(lg.mean())
        se[name] = float(lg.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        mean_raw[name] = float(v.mean())
    return GridCellSummary(
        sigma=sigma,
        k_fraction=kf,
        k=k,
        replications=reps,
        mean_log2_errors=mean_log2,
        std_errors=se,
        mean_errors=mean_raw,
        errors={name: tuple(float(x) for x in vals) for name, vals in errors.items()},
        extras=dict(extras or {}),
    )


def _skipped(sigma, kf, k, names, reason) -> GridCellSummary:
    nan = float("nan")
    return GridCellSummary(sigma, kf, k, 0, {e: nan for e in names}, {e: nan for e in names},
                           {e: nan for e in names}, {e: () for e in names}, {}, reason)


def _cells(spec: SimulationSpec):
    for sigma in spec.sigmas:
        for kf in spec.k_fractions:
            yield sigma, kf, k_from_fraction(kf, spec.n)


def run_grid(spec: SimulationSpec, workers: Optional[int] = None) -> List[GridCellSummary]:
    """Naive OLS, robust fit, thresholded refit and oracle OLS on every grid cell."""
    cells = list(_cells(spec))
    tasks, owners = [], []
    for ci, (sigma, kf, k) in enumerate(cells):
        if spec.n - k <= spec.d:
            continue
        for r in range(spec.replications):
            tasks.append((spec.n, spec.d, k, sigma, replication_seed(spec.base_seed, r)))
            owners.append(ci)
    results = _map(run_trial, tasks, workers)

    by_cell: Dict[int, List[TrialMetrics]] = {}
    for ci, m in zip(owners, results):
        by_cell.setdefault(ci, []).append(m)

    out = []
    for ci, (sigma, kf, k) in enumerate(cells):
        trials = by_cell.get(ci)
        if trials is None:
            out.append(_skipped(sigma, kf, k, GRID_ESTIMATORS, f"n - k = {spec.n - k} <= d = {spec.d}"))
            continue
        errors = {
            "naive": [t.l2_error_naive for t in trials],
            "robust": [t.l2_error_robust for t in trials],
            "refit": [t.l2_error_refit for t in trials],
            "oracle": [t.l2_error_oracle for t in trials],
        }
        extras = {
            "support_precision": float(np.mean([t.support_precision for t in trials])),
            "support_recall": float(np.mean([t.support_recall for t in trials])),
            "permutation_exact_rate": float(np.mean([t.permutation_exact for t in trials])),
            "mean_permutation_hamming_error": float(np.mean([t.permutation_hamming_error for t in trials])),
            "robust_converged_rate": float(np.mean([t.robust_converged for t in trials])),
        }
        out.append(_summarize(sigma, kf, k, errors, extras))
    return out


def run_d1_trial(task) -> Dict[str, float]:
    n, k, sigma, seed = task
    obs = synthesize(n, 1, k, sigma, seed)
    X, y, truth = obs.X, obs.y, obs.truth
    beta = truth.beta_star
    out = {}
    if n <= MAX_EXACT_N:
        ex = fit_exact_bruteforce(X, y, k)
        out["exact"] = _l2(ex.beta, beta)
        out["exact_objective"] = ex.objective
    _, b_sort = fit_exact_d1_sorting(X[:, 0], y)
    out["sorting"] = abs(b_sort - beta[0])
    out["robust"] = _l2(fit_robust(X, y, SimulationRule(sigma)).beta, beta)
    out["naive"] = _l2(fit_ols(X, y).beta, beta)
    out["oracle"] = _l2(oracle_ols(X, y, truth).beta, beta)
    return out


def run_d1_comparison(spec: SimulationSpec, workers: Optional[int] = None) -> List[GridCellSummary]:
    """Exact estimators against the robust fit for a single predictor.

    ``exact`` is the ``k``-constrained least-squares fit by exhaustive search
    (only for ``n <= 12``); ``sorting`` is the unconstrained fit, exact for
    ``k = n``.  ``extras['exact_le_robust_rate']`` is the fraction of
    replications where the exact (or, for larger ``n``, sorting) estimator's
    error does not exceed the robust one.
    """
    if spec.d != 1:
        raise ParameterError(f"d1 comparison needs d = 1, got d = {spec.d}")
    cells = list(_cells(spec))
    tasks, owners = [], []
    for ci, (sigma, kf, k) in enumerate(cells):
        if spec.n - k <= spec.d:
            continue
        for r in range(spec.replications):
            tasks.append((spec.n, k, sigma, replication_seed(spec.base_seed, r)))
            owners.append(ci)
    results = _map(run_d1_trial, tasks, workers)
    by_cell: Dict[int, List[Dict[str, float]]] = {}
    for ci, m in zip(owners, results):
        by_cell.setdefault(ci, []).append(m)

    names = (("exact",) if spec.n <= MAX_EXACT_N else ()) + ("sorting", "robust", "naive", "oracle")
    out = []
    for ci, (sigma, kf, k) in enumerate(cells):
        trials = by_cell.get(ci)
        if trials is None:
            out.append(_skipped(sigma, kf, k, names, f"n - k = {spec.n - k} <= d = 1"))
            continue
        errors = {name: [t[name] for t in trials] for name in names}
        best = "exact" if "exact" in names else "sorting"
        wins = [t[best] <= t["robust"] for t in trials]
        extras = {"exact_le_robust_rate": float(np.mean(wins))}
        if "exact" in names:
            extras["max_exact_objective"] = float(max(t["exact_objective"] for t in trials))
        out.append(_summarize(sigma, kf, k, errors, extras))
    return out


@dataclass
class Prop1Report:
    n: int
    sigma: float
    reps: int
    lower_bound: float
    mean_beta_sq: float
    fraction_exceeding: float
    beta_sq: Tuple[float, ...] = field(repr=False)


def prop1_demo(n: int, sigma: float, reps: int, seed: int) -> Prop1Report:
    """Unconstrained least squares over permutations on pure noise (``beta* = 0``)."""
    if reps < 1:
        raise ParameterError("reps must be at least 1")
    vals = []
    for r in range(reps):
        obs = synthesize(n, 1, 0, sigma, replication_seed(seed, r), beta_star=np.zeros(1))
        _, b = fit_exact_d1_sorting(obs.X[:, 0], obs.y)
        vals.append(b * b)
    bound = prop1_lower_bound(n, 1, sigma)
    v = np.asarray(vals)
    return Prop1Report(n, sigma, reps, bound, float(v.mean()), float(np.mean(v >= bound)), tuple(vals))


def snr_recovery_curve(n: int, d: int, snr_values: Iterable[float], reps: int, seed: int):
    """Empirical probability that sorted matching with the true coefficients recovers P*.

    All ``n`` rows are scrambled (``k = n``) and ``sigma = 1``; ``beta*`` is a
    random direction scaled to the target SNR.  ``snr = inf`` means no noise.
    Returns a list of ``(snr, recovery_rate)``.
    """
    rows = []
    for target in snr_values:
        target = float(target)
        if target < 0:
            raise ParameterError("SNR values must be nonnegative")
        hits = 0
        for r in range(reps):
            s = replication_seed(seed, r)
            unit = sample_unit_sphere(d, s)
            if math.isinf(target):
                beta, sigma = unit, 0.0
            else:
                beta, sigma = unit * math.sqrt(target), 1.0
            obs = synthesize(n, d, n, sigma, s, beta_star=beta)
            pi = recover_permutation_sorted(obs.X, obs.y, beta)
            hits += evaluate_permutation(pi, obs.truth)[0]
        rows.append((target, hits / reps))
    return rows


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_rows(summaries: Iterable[GridCellSummary]) -> List[Tuple]:
    rows = []
    for s in summaries:
        for name in s.estimators:
            rows.append((s.sigma, s.k_fraction, name, s.mean_log2_errors[name], s.std_errors[name], s.replications))
    return rows


def emit_results(summaries: Sequence[GridCellSummary], path, plot_path=None) -> None:
    """Write the summary CSV and a tab-separated plot-data companion.

    The plot file defaults to ``<path stem>.plot.tsv``; each (estimator, sigma)
    pair is one series with ``k_fraction`` on the x-axis.
    """
    path = os.fspath(path)
    if plot_path is None:
        root, _ = os.path.splitext(path)
        plot_path = root + ".plot.tsv"
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in csv_rows(summaries):
                w.writerow([_fmt(row[0]), _fmt(row[1]), row[2], _fmt(row[3]), _fmt(row[4]), _fmt(row[5])])
        with open(plot_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(PLOT_COLUMNS)
            names = []
            for s in summaries:
                names.extend(e for e in s.estimators if e not in names)
            for name in names:
                for s in sorted(summaries, key=lambda c: (c.sigma, c.k_fraction)):
                    if name in s.mean_log2_errors:
                        w.writerow([name, _fmt(s.sigma), _fmt(s.k_fraction),
                                    _fmt(s.mean_log2_errors[name]), _fmt(s.mean_errors.get(name, float("nan")))])
    except OSError as exc:
        raise OSError(f"cannot write results to {exc.filename or path}: {exc.strerror}") from exc


def read_results(path) -> List[GridCellSummary]:
    """Parse a CSV written by :func:`emit_results` (CSV columns only)."""
    cells: Dict[Tuple[float, float], GridCellSummary] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        for row in reader:
            sigma, kf, name, m, se, reps = row
            key = (float(sigma), float(kf))
            cell = cells.get(key)
            if cell is None:
                cell = GridCellSummary(key[0], key[1], -1, int(reps), {}, {})
                cells[key] = cell
            cell.mean_log2_errors[name] = float(m)
            cell.std_errors[name] = float(se)
    return list(cells.values())
