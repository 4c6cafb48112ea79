"""Command-line interface.

Exit codes: 0 success, 1 I/O or unreadable input, 2 configuration error,
3 numerical infeasibility (singular design, too few rows, violated bound
preconditions), 4 oracle mismatch in ``oracle-check``.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Dict, Optional

import numpy as np
import yaml

from . import harness, theory
from .errors import (
    BudgetError,
    DimensionError,
    InfeasibleError,
    InsufficientDataError,
    ParameterError,
    SingularDesignError,
)
from .io import CsvError, load_csv, write_table
from .model import SimulationSpec, replication_seed, synthesize
from .oracles import exhaustive_lsq, subgradient_robust
from .recovery import (
    estimate_support_mad,
    estimate_support_topk,
    recover_permutation_on_support,
    recover_permutation_sorted,
    refit_excluding,
)
from .relink import relink_demo
from .solvers import (
    MAX_EXACT_N,
    FixedLambda,
    HuberRule,
    SimulationRule,
    TheoremRule,
    fit_exact_bruteforce,
    fit_ols,
    fit_robust,
    kkt_residual,
    robust_scale,
)

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


# Keys accepted in each config-file section, with their defaults.
DEFAULTS: Dict[str, Dict] = {
    "simulate": {
        "n": 200,
        "d": 10,
        "sigmas": list(SimulationSpec.sigmas),
        "k_fractions": list(SimulationSpec.k_fractions),
        "reps": 100,
        "seed": 0,
        "d1": False,
        "output": "results.csv",
        "plot_output": None,
        "workers": None,
    },
    "fit": {
        "input": None,
        "response": None,
        "predictors": None,
        "intercept": False,
        "k": None,
        "lambda_rule": "huber",
        "sigma": None,
        "lambda": None,
        "M": 1.0,
        "tol": 1e-10,
        "max_iter": 10000,
        "match": False,
        "format": "text",
    },
    "recover": {
        "input": None,
        "response": None,
        "predictors": None,
        "intercept": False,
        "k": None,
        "theta": None,
        "lambda_rule": "huber",
        "sigma": None,
        "lambda": None,
        "M": 1.0,
    },
    "bounds": {
        "n": None,
        "d": None,
        "k": None,
        "sigma": 1.0,
        "eps": 0.25,
        "M": 1.0,
        "delta": 0.05,
        "Delta": 0.0,
        "thm2_eps": 0.1,
        "c1": 1.0,
        "format": "text",
    },
    "oracle_check": {
        "n": 6,
        "d": 1,
        "k": 2,
        "seed": 0,
        "instances": 5,
        "sigma": 0.1,
    },
    "relink_demo": {
        "input": None,
        "response": None,
        "block": None,
        "predictors": None,
        "intercept": False,
        "seed": 0,
        "splits": 20,
        "holdout": 0.1,
        "format": "text",
    },
}


def _floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _names(text: str):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparseperm", description="Linear regression with sparsely permuted data.")
    p.add_argument("--config", help="YAML file with one section per command")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def data_args(sp):
        sp.add_argument("--input", default=S, help="CSV file with a header row")
        sp.add_argument("--response", default=S, help="response column")
        sp.add_argument("--predictors", type=_names, default=S,
                        help="comma-separated predictor columns (default: all other numeric columns)")
        sp.add_argument("--intercept", action="store_true", default=S, help="add an intercept column")

    def lambda_args(sp):
        sp.add_argument("--lambda-rule", dest="lambda_rule", choices=["huber", "simulation", "theorem", "fixed"],
                        default=S)
        sp.add_argument("--sigma", type=float, default=S, help="noise level for the simulation/theorem rules")
        sp.add_argument("--lambda", dest="lambda", type=float, default=S, help="value for the fixed rule")
        sp.add_argument("--M", type=float, default=S)

    sp = sub.add_parser("simulate", help="Monte-Carlo grid over (sigma, k/n)")
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--d", type=int, default=S)
    sp.add_argument("--sigmas", type=_floats, default=S)
    sp.add_argument("--k-fractions", dest="k_fractions", type=_floats, default=S)
    sp.add_argument("--reps", type=int, default=S)
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--d1", action="store_true", default=S, help="exact-versus-robust comparison for d = 1")
    sp.add_argument("--output", default=S)
    sp.add_argument("--plot-output", dest="plot_output", default=S)
    sp.add_argument("--workers", type=int, default=S,
                    help=f"worker processes (default: ${harness.WORKERS_ENV} or 1)")

    sp = sub.add_parser("fit", help="naive, robust and refit coefficients for a CSV")
    data_args(sp)
    lambda_args(sp)
    sp.add_argument("--k", type=int, default=S, help="known number of mismatches")
    sp.add_argument("--tol", type=float, default=S)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    sp.add_argument("--match", action="store_true", default=S, help="also print the recovered matching")
    sp.add_argument("--format", choices=["text", "csv"], default=S)

    sp = sub.add_parser("recover", help="recover the response-to-row matching")
    data_args(sp)
    lambda_args(sp)
    sp.add_argument("--k", type=int, default=S)
    sp.add_argument("--theta", type=_floats, default=S, help="coefficients to match with (skips fitting)")

    sp = sub.add_parser("bounds", help="evaluate the theoretical bounds")
    for name, typ in (("n", int), ("d", int), ("k", int), ("sigma", float), ("eps", float), ("M", float),
                      ("delta", float), ("Delta", float), ("c1", float)):
        sp.add_argument(f"--{name}", type=typ, default=S)
    sp.add_argument("--thm2-eps", dest="thm2_eps", type=float, default=S)
    sp.add_argument("--format", choices=["text", "csv"], default=S)

    sp = sub.add_parser("oracle-check", help="cross-check solvers against brute-force oracles")
    for name, typ in (("n", int), ("d", int), ("k", int), ("seed", int), ("instances", int), ("sigma", float)):
        sp.add_argument(f"--{name}", type=typ, default=S)

    sp = sub.add_parser("relink-demo", help="shuffle responses within blocks and compare estimators")
    data_args(sp)
    sp.add_argument("--block", default=S, help="quasi-identifier column")
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--splits", type=int, default=S)
    sp.add_argument("--holdout", type=float, default=S)
    sp.add_argument("--format", choices=["text", "csv"], default=S)
    return p


def load_config(path: Optional[str]) -> Dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of command sections")
    return data


def resolve(command: str, config: Dict, flags: Dict) -> Dict:
    """Defaults, overridden by the config section, overridden by flags."""
    section = command.replace("-", "_")
    defaults = DEFAULTS[section]
    unknown_sections = set(config) - set(DEFAULTS)
    if unknown_sections:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown_sections))}")
    values = dict(defaults)
    sect = config.get(section) or {}
    if not isinstance(sect, dict):
        raise ConfigError(f"config section {section!r} must be a mapping")
    unknown = set(sect) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    values.update(sect)
    values.update(flags)
    return values


def _require(cfg: Dict, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


def _design(cfg: Dict, block: Optional[str] = None):
    ds = load_csv(cfg["input"], response=cfg["response"], block=block)
    if cfg.get("predictors"):
        names = list(cfg["predictors"])
    else:
        names = [c for c in ds.numeric_columns() if c != cfg["response"]]
    if not names and not cfg.get("intercept"):
        raise ConfigError("no predictor columns")
    try:
        X = ds.matrix(names)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    if cfg.get("intercept"):
        X = np.column_stack([np.ones(ds.n), X])
        names = ["intercept"] + names
    return ds, X, ds.column(cfg["response"]), names


def _lambda_rule(cfg: Dict, X, y):
    rule = cfg["lambda_rule"]
    if rule == "huber":
        return HuberRule(robust_scale(fit_ols(X, y).residuals))
    if rule == "fixed":
        _require(cfg, "lambda")
        return FixedLambda(float(cfg["lambda"]))
    _require(cfg, "sigma")
    if rule == "simulation":
        return SimulationRule(float(cfg["sigma"]))
    if rule == "theorem":
        return TheoremRule(float(cfg["M"]), float(cfg["sigma"]))
    raise ConfigError(f"unknown lambda rule {rule!r}")


def _vec(v) -> str:
    return "[" + ", ".join(f"{x:.10g}" for x in np.atleast_1d(v)) + "]"


def cmd_simulate(cfg: Dict, out) -> int:
    try:
        spec = SimulationSpec(
            n=int(cfg["n"]), d=int(cfg["d"]), k_fractions=tuple(cfg["k_fractions"]),
            sigmas=tuple(cfg["sigmas"]), replications=int(cfg["reps"]), base_seed=int(cfg["seed"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    workers = cfg.get("workers")
    runner = harness.run_d1_comparison if cfg["d1"] else harness.run_grid
    summaries = runner(spec, workers=workers)
    harness.emit_results(summaries, cfg["output"], cfg.get("plot_output"))
    skipped = [s for s in summaries if s.skipped]
    print(f"wrote {len(summaries)} cells to {cfg['output']}", file=out)
    for s in skipped:
        print(f"skipped sigma={s.sigma} k/n={s.k_fraction}: {s.skipped}", file=out)
    return EXIT_OK


def _fit_pipeline(cfg: Dict, X, y):
    n, d = X.shape
    k = cfg.get("k")
    if k is not None and n - int(k) <= d:
        raise InsufficientDataError(f"n - k = {n - int(k)} must exceed d = {d}")
    rule = _lambda_rule(cfg, X, y)
    robust = fit_robust(X, y, rule, tol=float(cfg.get("tol", 1e-10)), max_iter=int(cfg.get("max_iter", 10000)))
    support = estimate_support_topk(robust.e, int(k)) if k is not None else estimate_support_mad(robust.e)
    refit = refit_excluding(X, y, support)
    return robust, support, refit


def cmd_fit(cfg: Dict, out) -> int:
    _require(cfg, "input", "response")
    _, X, y, names = _design(cfg)
    naive = fit_ols(X, y)
    robust, support, refit = _fit_pipeline(cfg, X, y)
    pi = recover_permutation_on_support(X, y, support, refit.beta) if cfg["match"] else None
    if cfg["format"] == "csv":
        rows = [[name, naive.beta[j], robust.beta[j], refit.beta[j]] for j, name in enumerate(names)]
        write_table(rows, ["coefficient", "naive", "robust", "refit"], out)
        if pi is not None:
            print("", file=out)
            write_table([[i, int(pi.map[i])] for i in support.indices], ["row", "matched_row"], out)
        return EXIT_OK
    print(f"n={X.shape[0]} d={X.shape[1]} lambda={robust.lam:.6g} iterations={robust.iterations} "
          f"converged={robust.converged}", file=out)
    print(f"{'coefficient':<16}{'naive':>16}{'robust':>16}{'refit':>16}", file=out)
    for j, name in enumerate(names):
        print(f"{name:<16}{naive.beta[j]:>16.8g}{robust.beta[j]:>16.8g}{refit.beta[j]:>16.8g}", file=out)
    how = "top-k" if support.method == "TopK" else f"|e| > {support.threshold:.4g} (3 x MAD)"
    print(f"support ({how}, 0-based rows): {list(support.indices)}", file=out)
    if pi is not None:
        pairs = ", ".join(f"{i}->{int(pi.map[i])}" for i in support.indices)
        print(f"matching (response row -> predictor row): {pairs}", file=out)
    return EXIT_OK


def cmd_recover(cfg: Dict, out) -> int:
    _require(cfg, "input", "response")
    _, X, y, _ = _design(cfg)
    if cfg.get("theta") is not None:
        theta = np.asarray(cfg["theta"], dtype=float)
        if theta.shape != (X.shape[1],):
            raise ConfigError(f"--theta needs {X.shape[1]} values, got {theta.size}")
        if cfg.get("k") is None:
            pi = recover_permutation_sorted(X, y, theta)
        else:
            robust = fit_robust(X, y, _lambda_rule(cfg, X, y))
            pi = recover_permutation_on_support(X, y, estimate_support_topk(robust.e, int(cfg["k"])), theta)
    else:
        _, support, refit = _fit_pipeline(cfg, X, y)
        pi = recover_permutation_on_support(X, y, support, refit.beta)
    write_table([[i, int(pi.map[i])] for i in range(pi.n)], ["row", "matched_row"], out)
    return EXIT_OK


def cmd_bounds(cfg: Dict, out) -> int:
    _require(cfg, "n", "d", "k")
    try:
        inp = theory.BoundInputs(
            n=int(cfg["n"]), d=int(cfg["d"]), k=int(cfg["k"]), sigma=float(cfg["sigma"]), eps=float(cfg["eps"]),
            M=float(cfg["M"]), delta=float(cfg["delta"]), Delta=float(cfg["Delta"]),
            thm2_eps=float(cfg["thm2_eps"]), c1=float(cfg["c1"]),
        )
    except (DimensionError, ParameterError) as exc:
        raise InfeasibleError(str(exc)) from None
    report = theory.compute_bounds(inp).as_dict()
    if cfg["format"] == "csv":
        write_table([[report[k] if report[k] is not None else "" for k in report]], list(report), out)
    else:
        for key, val in report.items():
            print(f"{key:<26}{'infeasible' if val is None else val}", file=out)
    return EXIT_OK


def cmd_oracle_check(cfg: Dict, out) -> int:
    n, d, k = int(cfg["n"]), int(cfg["d"]), int(cfg["k"])
    if n > MAX_EXACT_N:
        raise ConfigError(f"oracle-check needs n <= {MAX_EXACT_N}, got n={n}")
    if not (1 <= d < n and 0 <= k <= n and k != 1):
        raise ConfigError(f"need 1 <= d < n and 0 <= k <= n, k != 1 (n={n}, d={d}, k={k})")
    failures = []
    for i in range(int(cfg["instances"])):
        seed = replication_seed(int(cfg["seed"]), i)
        obs = synthesize(n, d, k, float(cfg["sigma"]), seed)
        ex = fit_exact_bruteforce(obs.X, obs.y, k)
        ref, _, _ = exhaustive_lsq(obs.X, obs.y, k)
        gap_exact = abs(ex.objective - ref)
        lam = SimulationRule(float(cfg["sigma"])).value(n) if cfg["sigma"] > 0 else 1e-3
        rob = fit_robust(obs.X, obs.y, lam)
        ref_rob, _, _ = subgradient_robust(obs.X, obs.y, rob.lam)
        gap_rob = abs(rob.objective - ref_rob)
        kkt = kkt_residual(rob, obs.X, obs.y)
        ok = gap_exact <= 1e-9 and gap_rob <= 1e-6 and kkt <= 1e-6
        print(f"seed={seed} exact_gap={gap_exact:.3g} robust_gap={gap_rob:.3g} kkt={kkt:.3g} "
              f"{'ok' if ok else 'FAIL'}", file=out)
        if not ok:
            failures.append(seed)
    if failures:
        print(f"mismatch on seed(s): {', '.join(map(str, failures))}", file=out)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_relink_demo(cfg: Dict, out) -> int:
    _require(cfg, "input", "response", "block")
    ds, X, y, names = _design(cfg, block=cfg["block"])
    rep = relink_demo(X, y, ds.block_values, seed=int(cfg["seed"]), splits=int(cfg["splits"]),
                      holdout_fraction=float(cfg["holdout"]))
    rows = [
        [est, *rep.coefficients[est], rep.rmse[est], rep.l2_distance[est], rep.holdout_rmse_mean[est],
         rep.holdout_rmse_se[est]]
        for est in ("oracle", "naive", "robust")
    ]
    header = ["estimator", *names, "rmse", "l2_dist", "holdout_rmse", "holdout_se"]
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if cfg["format"] == "csv":
        write_table(rows, header, out)
        return EXIT_OK
    print(f"n={rep.n} mismatched rows after relinking: {rep.mismatched}; hold-out splits: {rep.splits}", file=out)
    print("".join(f"{h:>14}" for h in header), file=out)
    for row in rows:
        print(f"{row[0]:>14}" + "".join(f"{v:>14.6g}" for v in row[1:]), file=out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "recover": cmd_recover,
    "bounds": cmd_bounds,
    "oracle-check": cmd_oracle_check,
    "relink-demo": cmd_relink_demo,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = resolve(args.command, load_config(args.config), flags)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"I/O error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except CsvError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyError as exc:
        print(f"config error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularDesignError, InsufficientDataError, InfeasibleError, BudgetError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DimensionError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
