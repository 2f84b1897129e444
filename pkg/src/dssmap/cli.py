"""Command-line entry point.

Subcommands wire the library into reproducible file-based runs:

    simulate   write a synthetic benchmark instance to a directory
    fit        fit one method to a panel CSV and write its outputs
    grid       replicate the benchmark study over a hyperparameter grid
    forecast   expanding-window one-step-ahead comparison
    scan       penalty / threshold scans over a coefficient grid

Outputs are flat CSV/JSON files; every run writes a manifest of its resolved
configuration so it can be re-created from its artifacts alone.  Exit codes:
0 clean, 2 configuration error, 3 data error, 4 numerical failure,
5 partial results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import dlm_fit, lasso_expanding_path
from .em import Dataset, FitOptions, fit_map, save_fit, coefpath_to_csv
from .errors import (
    ConfigurationError,
    DssError,
    NumericalError,
    ParameterError,
    StructuralError,
)
from .experiments import (
    ReplicationConfig,
    load_panel_csv,
    run_forecast_experiment,
    run_replications,
    simulate_panel,
    simulate_synthetic,
    table_grid,
)
from .params import DssParams
from .penalty import penalty_scan
from .threshold import threshold_scan

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_PARTIAL = 5


def _write_manifest(outdir: Path, command: str, resolved: dict) -> None:
    manifest = {"tool": "dssmap", "version": __version__, "command": command}
    manifest.update(resolved)
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _outdir(value: str) -> Path:
    out = Path(value)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params_from_args(args) -> DssParams:
    lambda1 = args.lambda1
    if lambda1 is None:
        if args.slab_var is None:
            raise ConfigurationError("pass either --lambda1 or --slab-var")
        lambda1 = args.slab_var * (1.0 - args.phi1**2)
    return DssParams(
        theta_marginal=args.theta,
        lambda0=args.lambda0,
        lambda1=lambda1,
        phi0=0.0,
        phi1=args.phi1,
    )


def _dataset_to_csv(dataset: Dataset, file) -> None:
    import csv

    names = dataset.column_names or tuple(f"x{j+1}" for j in range(dataset.n_series))
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y"] + list(names))
        for t in range(dataset.n_times):
            writer.writerow(
                [repr(float(dataset.responses[t]))]
                + [repr(float(v)) for v in dataset.design[t]]
            )


def _mask_to_csv(mask: np.ndarray, file) -> None:
    import csv

    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"s{j+1}" for j in range(mask.shape[0])])
        for t in range(mask.shape[1]):
            writer.writerow([t + 1] + [int(v) for v in mask[:, t]])


def cmd_simulate(args) -> int:
    out = _outdir(args.out)
    truth = simulate_synthetic(args.p, args.T, args.seed)
    _dataset_to_csv(truth.dataset, out / "dataset.csv")
    coefpath_to_csv(truth.true_path, out / "truth.csv")
    _mask_to_csv(truth.active_mask, out / "mask.csv")
    _write_manifest(
        out,
        "simulate",
        {
            "p": args.p,
            "T": args.T,
            "seed": args.seed,
            "rejection_attempts": truth.rejection_attempts,
            "files": ["dataset.csv", "truth.csv", "mask.csv"],
        },
    )
    print(f"wrote synthetic instance (p={args.p}, T={args.T}, seed={args.seed}) to {out}")
    return EXIT_OK


def _load_dataset(args) -> Dataset:
    path = Path(args.data)
    if not path.exists():
        raise StructuralError(f"input file not found: {path}")
    return load_panel_csv(path, target=args.target, date_column=args.date_column).dataset


def cmd_fit(args) -> int:
    out = _outdir(args.out)
    data = _load_dataset(args)
    resolved = {"method": args.method, "data": args.data, "target": args.target}
    if args.method == "dss":
        params = _params_from_args(args)
        options = FitOptions(max_iters=args.max_iters, tol=args.tol)
        fit = fit_map(data, params, options)
        save_fit(fit, out, names=data.column_names)
        resolved.update(
            {
                "theta": params.theta_marginal,
                "lambda0": params.lambda0,
                "lambda1": params.lambda1,
                "phi1": params.phi1,
                "max_iters": options.max_iters,
                "tol": options.tol,
                "iterations": fit.iterations,
                "converged": fit.converged,
            }
        )
        print(
            f"dss fit: {fit.iterations} iterations, converged={fit.converged}, "
            f"final objective {fit.objective_trace[-1]:.6f}"
        )
        code = EXIT_OK if fit.converged else EXIT_PARTIAL
    elif args.method == "dlm":
        lambda1 = args.lambda1
        if lambda1 is None:
            lambda1 = (args.slab_var or 10.0) * (1.0 - args.phi1**2)
        path = dlm_fit(data, args.phi1, lambda1)
        coefpath_to_csv(path, out / "coefficients.csv", names=data.column_names)
        resolved.update({"phi1": args.phi1, "lambda1": lambda1})
        print(f"dlm fit solved ({data.n_times} times, {data.n_series} series)")
        code = EXIT_OK
    elif args.method == "lasso":
        path = lasso_expanding_path(data, folds=args.folds, seed=args.seed)
        coefpath_to_csv(path, out / "coefficients.csv", names=data.column_names)
        resolved.update({"folds": args.folds, "seed": args.seed})
        print("lasso expanding-window path written")
        code = EXIT_OK
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigurationError(f"unknown method {args.method}")
    _write_manifest(out, "fit", resolved)
    return code


def cmd_grid(args) -> int:
    out = _outdir(args.out)
    cells = table_grid()
    if args.cells:
        wanted = set(args.cells)
        cells = [c for i, c in enumerate(cells) if i in wanted]
    config = ReplicationConfig(
        p=args.p,
        n_times=args.T,
        seeds=tuple(range(args.seeds)),
        include_dlm=not args.no_dlm,
        include_lasso=not args.no_lasso,
        dss_cells=tuple(cells),
        dss_options=FitOptions(max_iters=args.max_iters, tol=args.tol),
        workers=args.workers,
    )
    report = run_replications(config)
    report.to_csv(out / "report.csv")
    n_failures = sum(r["n_failures"] for r in report.rows)
    _write_manifest(
        out,
        "grid",
        {
            "p": args.p,
            "T": args.T,
            "seeds": args.seeds,
            "n_cells": len(report.rows),
            "workers": args.workers,
            "failures": n_failures,
        },
    )
    print(f"grid report with {len(report.rows)} rows written to {out/'report.csv'}")
    return EXIT_PARTIAL if n_failures else EXIT_OK


def _write_msfe_csv(file, forecast) -> None:
    import csv

    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "error", "msfe"])
        for i, (e, m) in enumerate(zip(forecast.errors, forecast.msfe), start=1):
            writer.writerow([i, "" if np.isnan(e) else repr(float(e)), repr(float(m))])


def cmd_forecast(args) -> int:
    out = _outdir(args.out)
    if args.data:
        data = _load_dataset(args)
    else:
        truth = simulate_panel(
            args.p, args.T, args.seed, n_persistent=1, n_intermittent=args.active - 1
        )
        data = truth.dataset
    params = _params_from_args(args)
    split = args.split or data.n_times // 2
    config = {
        "dss": {
            "params": params,
            "options": FitOptions(max_iters=args.max_iters, tol=args.tol),
            "warm_start": not args.cold_start,
        },
        "dlm": {"phi1": args.phi1, "lambda1": params.lambda1},
        "lasso": {"folds": args.folds, "seed": args.seed},
    }
    report = run_forecast_experiment(data, split, args.methods, config)
    finals = {}
    for name, method in report.methods.items():
        _write_msfe_csv(out / f"msfe_{name}.csv", method)
        finals[name] = method.final_msfe
        print(f"{name}: final MSFE {method.final_msfe:.6f} "
              f"({len(method.failed_steps)} failed steps)")
    _write_manifest(
        out,
        "forecast",
        {
            "split": split,
            "methods": list(report.methods),
            "final_msfe": finals,
            "synthetic": not args.data,
            "p": args.p,
            "T": args.T,
            "seed": args.seed,
        },
    )
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_scan(args) -> int:
    import csv

    out = _outdir(args.out)
    params = _params_from_args(args)
    grid = np.linspace(args.beta_min, args.beta_max, args.points)
    if args.kind == "penalty":
        rows = penalty_scan(params, args.beta_prev, args.beta_next, grid)
        header = [
            "beta",
            "prospective_pen",
            "retrospective_pen",
            "total_pen",
            "prospective_shrinkage",
            "retrospective_shrinkage",
            "total_shrinkage",
        ]
        file = out / "penalty_scan.csv"
    else:
        rows = threshold_scan(params, args.x, args.beta_prev, args.beta_next, grid)
        header = ["y", "lower", "upper", "beta_hat"]
        file = out / "threshold_scan.csv"
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else repr(float(v)) for v in row])
    _write_manifest(
        out,
        "scan",
        {
            "kind": args.kind,
            "beta_prev": args.beta_prev,
            "beta_next": args.beta_next,
            "x": args.x,
            "grid": [args.beta_min, args.beta_max, args.points],
            "file": file.name,
        },
    )
    print(f"{args.kind} scan written to {file}")
    return EXIT_OK


def _add_params_flags(sub, slab_var_default=None):
    sub.add_argument("--theta", type=float, default=0.98, help="marginal slab weight")
    sub.add_argument("--lambda0", type=float, default=0.9, help="spike rate")
    sub.add_argument("--lambda1", type=float, default=None, help="conditional slab variance")
    sub.add_argument(
        "--slab-var",
        type=float,
        default=slab_var_default,
        help="stationary slab variance (alternative to --lambda1)",
    )
    sub.add_argument("--phi1", type=float, default=0.98, help="slab autoregression")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dssmap",
        description="Dynamic spike-and-slab MAP smoothing for sparse time-varying regression",
    )
    parser.add_argument("--config", type=str, default=None, help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic benchmark instance")
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--T", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", type=str, required=True)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit one method to a panel CSV")
    fit.add_argument("--data", type=str, required=True)
    fit.add_argument("--target", type=str, default="y")
    fit.add_argument("--date-column", action="store_true")
    fit.add_argument("--method", choices=["dss", "dlm", "lasso"], default="dss")
    _add_params_flags(fit, slab_var_default=25.0)
    fit.add_argument("--max-iters", type=int, default=2000)
    fit.add_argument("--tol", type=float, default=1e-6)
    fit.add_argument("--folds", type=int, default=10)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", type=str, required=True)
    fit.set_defaults(func=cmd_fit)

    grid = sub.add_parser("grid", help="replicated benchmark study over the grid")
    grid.add_argument("--p", type=int, default=50)
    grid.add_argument("--T", type=int, default=100)
    grid.add_argument("--seeds", type=int, default=10, help="number of replications")
    grid.add_argument("--cells", type=int, nargs="*", default=None,
                      help="indices into the 24-cell grid (default: all)")
    grid.add_argument("--no-dlm", action="store_true")
    grid.add_argument("--no-lasso", action="store_true")
    grid.add_argument("--max-iters", type=int, default=2000)
    grid.add_argument("--tol", type=float, default=1e-6)
    grid.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    grid.add_argument("--out", type=str, required=True)
    grid.set_defaults(func=cmd_grid)

    fc = sub.add_parser("forecast", help="expanding-window one-step-ahead comparison")
    fc.add_argument("--data", type=str, default=None, help="panel CSV (default: synthetic)")
    fc.add_argument("--target", type=str, default="y")
    fc.add_argument("--date-column", action="store_true")
    fc.add_argument("--p", type=int, default=20)
    fc.add_argument("--T", type=int, default=120)
    fc.add_argument("--active", type=int, default=3, help="active series in the synthetic panel")
    fc.add_argument("--seed", type=int, default=0)
    fc.add_argument("--split", type=int, default=None, help="training rows before forecasting")
    fc.add_argument("--methods", nargs="+", default=["dss", "dlm", "lasso"])
    _add_params_flags(fc, slab_var_default=25.0)
    fc.add_argument("--max-iters", type=int, default=2000)
    fc.add_argument("--tol", type=float, default=1e-6)
    fc.add_argument("--folds", type=int, default=10)
    fc.add_argument("--cold-start", action="store_true")
    fc.add_argument("--out", type=str, required=True)
    fc.set_defaults(func=cmd_forecast)

    scan = sub.add_parser("scan", help="penalty or threshold scan to CSV")
    scan.add_argument("--kind", choices=["penalty", "threshold"], required=True)
    _add_params_flags(scan, slab_var_default=10.0)
    scan.add_argument("--beta-prev", type=float, default=0.0)
    scan.add_argument("--beta-next", type=float, default=0.0)
    scan.add_argument("--x", type=float, default=1.0)
    scan.add_argument("--beta-min", type=float, default=-3.0)
    scan.add_argument("--beta-max", type=float, default=3.0)
    scan.add_argument("--points", type=int, default=241)
    scan.add_argument("--out", type=str, required=True)
    scan.set_defaults(func=cmd_scan)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Merge defaults from --config JSON; explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        cfg_path = argv[idx + 1]
    except IndexError:
        raise ConfigurationError("--config needs a file path") from None
    try:
        with open(cfg_path) as fh:
            defaults = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(defaults, dict):
        raise ConfigurationError("config file must hold a JSON object of flag defaults")
    merged = argv[:idx] + argv[idx + 2 :]
    for key, value in defaults.items():
        flag = f"--{key.replace('_', '-')}"
        if flag in merged:
            continue
        if isinstance(value, bool):
            if value:
                merged.append(flag)
        elif isinstance(value, list):
            merged.append(flag)
            merged.extend(str(v) for v in value)
        else:
            merged.extend([flag, str(value)])
    return merged


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StructuralError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
