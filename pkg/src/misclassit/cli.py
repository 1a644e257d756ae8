"""Command-line interface: fit, bootstrap, simulate.

Input CSV schema (header required): ``y`` (blank on surrogate-only rows),
``ytilde``, optional integer ``group``, then ``x1..xp``.  The validation /
non-validation split is decided by y-missingness, not row order.  With
``intercept: true`` in the JSON config a leading constant-1 column is
prepended to the covariates.

Reports are JSON on stdout (or ``--out``); stderr carries human-readable
messages.  Exit codes: 0 success, 2 schema violation, 3 solver failure,
4 identifiability failure.  Floats are emitted with full round-trip
precision (17 significant digits), so reports diff cleanly.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bootstrap import (
    BootstrapConfig,
    percentile_ci_linear,
    percentile_ci_risk,
    run_bootstrap,
)
from .covariance import bundle_from_fit, wald_ci
from .data import Dataset
from .errors import (
    DomainError,
    IdentifiabilityError,
    InsufficientSuccesses,
    MisclassitError,
    NonConvergence,
    SchemaError,
    SingularJacobian,
    SingularZdot,
)
from .estimators import SolverOptions, fit_cmle, fit_jmle, fit_naive, fit_pmle
from .extensions import (
    GroupedDataset,
    fit_pmle_grouped,
    fit_pmle_theta2_zero,
    grouped_covariance,
    theta2_zero_covariance,
)
from .simulate import (
    BUILTIN_MODELS,
    SimConfig,
    bias_mse_csv,
    coverage_csv,
    run_bias_mse_study,
    run_coverage_study,
)

EXIT_SCHEMA = 2
EXIT_SOLVER = 3
EXIT_IDENT = 4

REPORT_VERSION = 1


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(_to_jsonable(report), indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fail(exc: Exception, code: int, out_path: str | None = None) -> int:
    _emit({"error": {"type": type(exc).__name__, "message": str(exc)}}, out_path)
    print(f"error: {exc}", file=sys.stderr)
    return code


def read_dataset_csv(path: str, intercept: bool = False):
    """Parse the CSV schema into per-group row lists.

    Returns (groups, has_group_column) where groups maps group id to
    (y_or_None list, ytilde list, x rows list).
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("empty file or missing header")
        names = [n.strip() for n in reader.fieldnames]
        for required in ("y", "ytilde"):
            if required not in names:
                raise SchemaError(f"missing required column {required!r}")
        xcols = sorted(
            (n for n in names if n.startswith("x") and n[1:].isdigit()),
            key=lambda n: int(n[1:]),
        )
        if not xcols:
            raise SchemaError("no covariate columns x1..xp found")
        if [int(n[1:]) for n in xcols] != list(range(1, len(xcols) + 1)):
            raise SchemaError("covariate columns must be contiguous x1..xp")
        has_group = "group" in names
        groups: dict[int, list] = {}
        for i, row in enumerate(reader, start=2):
            yt_raw = (row.get("ytilde") or "").strip()
            if yt_raw not in ("0", "1"):
                raise SchemaError(f"line {i}: ytilde must be 0 or 1, got {yt_raw!r}")
            y_raw = (row.get("y") or "").strip()
            if y_raw not in ("", "0", "1"):
                raise SchemaError(f"line {i}: y must be 0, 1 or empty, got {y_raw!r}")
            gid = 0
            if has_group:
                g_raw = (row.get("group") or "").strip()
                try:
                    gid = int(g_raw)
                except ValueError:
                    raise SchemaError(f"line {i}: group must be an integer, got {g_raw!r}")
            try:
                x = [float(row[c]) for c in xcols]
            except (ValueError, TypeError, KeyError):
                raise SchemaError(f"line {i}: covariates must be numeric")
            if intercept:
                x = [1.0] + x
            bucket = groups.setdefault(gid, ([], [], []))
            bucket[0].append(None if y_raw == "" else int(y_raw))
            bucket[1].append(int(yt_raw))
            bucket[2].append(x)
    if not groups:
        raise SchemaError("no data rows")
    return groups, has_group


def _build_dataset(bucket, intercept: bool) -> Dataset:
    ys, yts, xs = bucket
    val_idx = [i for i, y in enumerate(ys) if y is not None]
    nv_idx = [i for i, y in enumerate(ys) if y is None]
    if not val_idx:
        raise SchemaError("no validation rows (all y values missing); n1 >= 1 required")
    x = np.asarray(xs, dtype=float)
    return Dataset(
        y_val=np.array([ys[i] for i in val_idx]),
        ytilde_val=np.array([yts[i] for i in val_idx]),
        x_val=x[val_idx],
        ytilde_nv=np.array([yts[i] for i in nv_idx], dtype=np.int8),
        x_nv=x[nv_idx] if nv_idx else None,
        has_intercept=intercept,
    )


def load_dataset(path: str, intercept: bool = False) -> Dataset:
    groups, _ = read_dataset_csv(path, intercept)
    merged = ([], [], [])
    for gid in sorted(groups):
        for part, acc in zip(groups[gid], merged):
            acc.extend(part)
    return _build_dataset(merged, intercept)


def load_grouped_dataset(path: str, intercept: bool = False) -> GroupedDataset:
    groups, has_group = read_dataset_csv(path, intercept)
    if not has_group:
        raise SchemaError("--grouped requires a 'group' column")
    return GroupedDataset(
        tuple(_build_dataset(groups[gid], intercept) for gid in sorted(groups))
    )


def write_dataset_csv(dataset: Dataset, path: str) -> None:
    """Emit a dataset in the input schema (round-trips exactly)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "ytilde"] + [f"x{j+1}" for j in range(dataset.p)])
        for y, yt, x in zip(dataset.y_val, dataset.ytilde_val, dataset.x_val):
            writer.writerow([int(y), int(yt)] + [repr(float(v)) for v in x])
        for yt, x in zip(dataset.ytilde_nv, dataset.x_nv):
            writer.writerow(["", int(yt)] + [repr(float(v)) for v in x])


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise SchemaError("config file must hold a JSON object")
    return cfg


def _solver_options(cfg: dict) -> SolverOptions:
    kwargs = {}
    for key in ("tol", "max_iter", "damping", "max_step"):
        if key in cfg:
            kwargs[key] = cfg[key]
    return SolverOptions(**kwargs)


def _base_report(command: str, args, seed=None) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "software": {"name": "misclassit", "version": __version__},
        "command": command,
        "seed": seed,
        "timing_s": 0.0,
    }


def _data_block(dataset: Dataset, path: str) -> dict:
    return {
        "path": os.path.basename(path),
        "n": dataset.n,
        "n1": dataset.n1,
        "n2": dataset.n2,
        "p": dataset.p,
        "has_intercept": dataset.has_intercept,
    }


def _fit_block(fit) -> dict:
    theta = fit.theta_hat
    return {
        "beta": fit.beta,
        "theta": [theta.theta1, theta.theta2] if theta is not None else None,
    }


def _diag_block(fit) -> dict:
    return {
        "converged": fit.converged,
        "iterations": fit.iterations,
        "final_score_norm": fit.final_score_norm,
        "warnings": [w.value for w in fit.warnings],
    }


def _cmd_fit(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = _load_config(args.config)
        intercept = bool(cfg.get("intercept", False))
        opts = _solver_options(cfg)
        if args.grouped and args.method != "pmle":
            raise SchemaError("--grouped is supported for --method pmle only")
        if args.theta2_zero and args.method != "pmle":
            raise SchemaError("--theta2-zero is supported for --method pmle only")
        if args.ci == "wald" and args.method not in ("pmle",):
            raise SchemaError("wald intervals are available for --method pmle only")
        theta_ests = None
        if args.grouped:
            gd = load_grouped_dataset(args.data, intercept)
            dataset = gd.pooled()
        else:
            dataset = load_dataset(args.data, intercept)
    except (SchemaError, DomainError, OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(exc, EXIT_SCHEMA, args.out)

    report = _base_report("fit", args)
    report["method"] = args.method
    report["data"] = _data_block(dataset, args.data)
    try:
        if args.grouped:
            fit, theta_ests = fit_pmle_grouped(gd, opts)
        elif args.theta2_zero:
            fit = fit_pmle_theta2_zero(dataset, opts)
        elif args.method == "pmle":
            fit = fit_pmle(dataset, opts)
        elif args.method == "naive":
            fit = fit_naive(dataset, opts)
        elif args.method == "jmle":
            fit = fit_jmle(dataset, opts)
        else:
            fit = fit_cmle(dataset, opts)
    except IdentifiabilityError as exc:
        return _fail(exc, EXIT_IDENT, args.out)
    except (NonConvergence, SingularJacobian) as exc:
        return _fail(exc, EXIT_SOLVER, args.out)
    except MisclassitError as exc:
        return _fail(exc, EXIT_SCHEMA, args.out)

    report["estimates"] = _fit_block(fit)
    if theta_ests is not None:
        report["estimates"]["per_group_theta"] = [
            [e.theta.theta1, e.theta.theta2] for e in theta_ests
        ]
    report["diagnostics"] = _diag_block(fit)
    if not fit.converged:
        report["error"] = {"type": "NonConvergence", "message": "solver did not converge"}
        _finish(report, t0, args)
        print("error: solver did not converge", file=sys.stderr)
        return EXIT_SOLVER

    report["covariance"] = None
    report["ci"] = None
    if args.ci == "wald":
        try:
            if args.grouped:
                bundle = grouped_covariance(gd, fit, theta_ests)
            elif args.theta2_zero:
                bundle = theta2_zero_covariance(dataset, fit)
            else:
                bundle = bundle_from_fit(dataset, fit)
        except IdentifiabilityError as exc:
            return _fail(exc, EXIT_IDENT, args.out)
        except (SingularZdot, MisclassitError) as exc:
            return _fail(exc, EXIT_SOLVER, args.out)
        report["covariance"] = {"beta_cov": bundle.beta_cov, "f_used": bundle.f_used}
        report["ci"] = {
            "type": "wald",
            "level": args.level,
            "intervals": wald_ci(bundle, fit.beta_hat, args.level),
        }
    _finish(report, t0, args)
    return 0


def _finish(report: dict, t0: float, args) -> None:
    report["timing_s"] = 0.0 if args.deterministic else time.perf_counter() - t0
    _emit(report, args.out)


def _parse_vector(text: str, p: int, name: str) -> np.ndarray:
    try:
        vec = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise SchemaError(f"{name} must be a comma-separated numeric vector")
    if vec.shape[0] != p:
        raise SchemaError(f"{name} must have length {p}")
    return vec


def _cmd_bootstrap(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = _load_config(args.config)
        intercept = bool(cfg.get("intercept", False))
        opts = _solver_options(cfg)
        dataset = load_dataset(args.data, intercept)
        if not 0.0 < args.eta < 0.5:
            raise SchemaError("--eta must lie in (0, 0.5)")
        cvecs = [_parse_vector(c, dataset.p, "--c") for c in (args.c or [])]
        x0 = _parse_vector(args.risk_x0, dataset.p, "--risk-x0") if args.risk_x0 else None
    except (SchemaError, DomainError, OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(exc, EXIT_SCHEMA, args.out)

    report = _base_report("bootstrap", args, seed=args.seed)
    report["data"] = _data_block(dataset, args.data)
    report["B"] = args.B
    report["eta"] = args.eta
    try:
        fit = fit_pmle(dataset, opts)
        if not fit.converged:
            raise NonConvergence("original plug-in fit did not converge")
        bcfg = BootstrapConfig(
            B=args.B,
            seed=args.seed,
            min_success_fraction=args.min_success_fraction,
        )
        draws = run_bootstrap(dataset, opts, bcfg, fit=fit, threads=args.threads)
    except IdentifiabilityError as exc:
        return _fail(exc, EXIT_IDENT, args.out)
    except (NonConvergence, InsufficientSuccesses, SingularJacobian) as exc:
        return _fail(exc, EXIT_SOLVER, args.out)
    except MisclassitError as exc:
        return _fail(exc, EXIT_SCHEMA, args.out)

    report["estimates"] = _fit_block(fit)
    report["diagnostics"] = _diag_block(fit)
    report["replicates"] = draws.status_counts()
    level = 1.0 - 2.0 * args.eta
    if not cvecs and x0 is None:
        cvecs = [np.eye(dataset.p)[j] for j in range(dataset.p)]
    ci_linear = [
        {"c": c, "interval": percentile_ci_linear(draws, c, args.eta)} for c in cvecs
    ]
    report["ci"] = {"type": "percentile", "level": level, "linear": ci_linear}
    if x0 is not None:
        report["ci"]["risk"] = {
            "x0": x0,
            "interval": percentile_ci_risk(draws, x0, args.eta),
        }
    _finish(report, t0, args)
    return 0


_COVERAGE_DESIGNS = {"table1": 300, "table2": 600, "table3": 1000, "table4": 1000}


def _cmd_simulate(args) -> int:
    try:
        if args.design == "table5":
            cfg = SimConfig(n=300, f_n=0.2, reps=args.reps, seed=args.seed, B=args.B)
            summary = run_bias_mse_study(cfg=cfg, threads=args.threads)
            table = bias_mse_csv(summary)
        elif args.design in _COVERAGE_DESIGNS:
            n = _COVERAGE_DESIGNS[args.design]
            models = ["p9"] if args.design == "table4" else args.models.split(",")
            fractions = [float(f) for f in args.fractions.split(",")]
            rows = []
            config_echo = []
            for name in models:
                if name not in BUILTIN_MODELS:
                    raise SchemaError(f"unknown model {name!r}")
                for f_n in fractions:
                    cfg = SimConfig(
                        n=n, f_n=f_n, reps=args.reps, seed=args.seed, B=args.B,
                        level=args.level,
                    )
                    summary = run_coverage_study(
                        BUILTIN_MODELS[name](), cfg, threads=args.threads,
                        with_bootstrap=not args.no_bootstrap,
                    )
                    rows.extend(summary.coverage)
                    config_echo.append(summary.config)
            summary.coverage = rows
            summary.config = {"designs": config_echo}
            table = coverage_csv(summary)
        else:
            raise SchemaError(f"unknown design {args.design!r}")
    except (SchemaError, DomainError, ValueError) as exc:
        return _fail(exc, EXIT_SCHEMA)
    except MisclassitError as exc:
        return _fail(exc, EXIT_SOLVER)

    sidecar = {
        "report_version": REPORT_VERSION,
        "software": {"name": "misclassit", "version": __version__},
        "command": "simulate",
        "design": args.design,
        "seed": args.seed,
        "reps": args.reps,
        "B": args.B,
        "config": summary.config,
    }
    csv_path = args.out + ".csv"
    with open(csv_path, "w") as fh:
        fh.write(table)
    with open(args.out + ".json", "w") as fh:
        fh.write(json.dumps(_to_jsonable(sidecar), indent=2) + "\n")
    print(f"wrote {csv_path} and {args.out}.json", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misclassit",
        description="Logistic regression with misclassified responses: "
        "plug-in estimation, sandwich and bootstrap inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one estimator to a CSV dataset")
    fit.add_argument("--method", choices=["pmle", "jmle", "cmle", "naive"], required=True)
    fit.add_argument("--data", required=True)
    fit.add_argument("--theta2-zero", action="store_true", dest="theta2_zero")
    fit.add_argument("--grouped", action="store_true")
    fit.add_argument("--ci", choices=["wald", "none"], default="none")
    fit.add_argument("--level", type=float, default=0.95)
    fit.add_argument("--config")
    fit.add_argument("--out")
    fit.add_argument("--deterministic", action="store_true",
                     help="zero out wall-clock fields for byte-stable reports")
    fit.set_defaults(func=_cmd_fit)

    boot = sub.add_parser("bootstrap", help="percentile bootstrap intervals")
    boot.add_argument("--data", required=True)
    boot.add_argument("--B", type=int, default=700)
    boot.add_argument("--seed", type=int, default=0)
    boot.add_argument("--eta", type=float, default=0.025)
    boot.add_argument("--c", action="append",
                      help="comma-separated contrast vector (repeatable)")
    boot.add_argument("--risk-x0", dest="risk_x0",
                      help="covariate profile for an event-probability interval")
    boot.add_argument("--min-success-fraction", type=float, default=0.95)
    boot.add_argument("--config")
    boot.add_argument("--threads", type=int, default=None)
    boot.add_argument("--out")
    boot.add_argument("--deterministic", action="store_true")
    boot.set_defaults(func=_cmd_bootstrap)

    sim = sub.add_parser("simulate", help="run a built-in simulation design")
    sim.add_argument("--design", required=True,
                     choices=["table1", "table2", "table3", "table4", "table5"])
    sim.add_argument("--reps", type=int, default=250)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--B", type=int, default=700)
    sim.add_argument("--level", type=float, default=0.95)
    sim.add_argument("--models", default="a,b,c")
    sim.add_argument("--fractions", default="0.1,0.2,0.3")
    sim.add_argument("--no-bootstrap", action="store_true", dest="no_bootstrap")
    sim.add_argument("--threads", type=int, default=None)
    sim.add_argument("--out", default="misclassit_sim")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
