"""Command-line front end: compute a statistic, test user data, or run a
simulation grid.

Exit codes: 0 success, 1 usage or I/O problems, 2 statistical degeneracy (a
failed existence condition; the witness direction is printed when available).
Defaults can be overridden through CONETEST_* environment variables
(CONETEST_ALPHA, CONETEST_RESAMPLES, CONETEST_SEED, CONETEST_WORKERS,
CONETEST_FORMAT).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from .cones import parse_cone
from .errors import (
    ConeSpecError,
    ConvergenceError,
    CsvFormatError,
    DegenerateInputError,
    ExistenceError,
    GridLookupError,
    SubsetBudgetError,
    UnsupportedConeOperation,
)
from .estimators import DataMatrix, covariance_estimator, sample_mean
from .inference import randomization_test
from .simulation import grid_configs, result_rows, run_experiment
from .statistic import conic_statistic, geometric_decomposition

_USAGE_ERRORS = (
    ConeSpecError,
    CsvFormatError,
    GridLookupError,
    UnsupportedConeOperation,
    SubsetBudgetError,
    ConvergenceError,
    OSError,
    ValueError,
    KeyError,
)
_DEGENERACY_ERRORS = (ExistenceError, DegenerateInputError)

_CONE_HELP = (
    "cone spec: full | nonneg | coord:J (1-based) | ksparse:K | ksparse+:K | "
    "lasso:T | dirs:FILE"
)


def _env(name, default):
    return os.environ.get(f"CONETEST_{name}", default)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conetest",
        description="Conic test statistics with reflection-randomization inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_test_flags):
        p.add_argument("data", help="CSV file, one observation per row")
        p.add_argument("--cone", required=True, help=_CONE_HELP)
        p.add_argument("--estimator", default=_env("ESTIMATOR", "full"),
                       choices=["full", "diagonal", "pooled"])
        header = p.add_mutually_exclusive_group()
        header.add_argument("--header", dest="header", action="store_true",
                            help="first CSV row is a header")
        header.add_argument("--no-header", dest="header", action="store_false")
        p.set_defaults(header=False)
        p.add_argument("--format", default=_env("FORMAT", "json"), choices=["json", "csv"])
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if with_test_flags:
            p.add_argument("--alpha", type=float, default=float(_env("ALPHA", "0.05")))
            p.add_argument("--resamples", type=int, default=int(_env("RESAMPLES", "1000")))
            p.add_argument("--seed", type=int, default=int(_env("SEED", "0")))

    p_stat = sub.add_parser("stat", help="compute the conic statistic on a data file")
    common(p_stat, with_test_flags=False)
    p_stat.add_argument("--decompose", action="store_true",
                        help="also emit the projection decomposition as CSV columns")

    p_test = sub.add_parser("test", help="reflection-randomization test on a data file")
    common(p_test, with_test_flags=True)

    p_sim = sub.add_parser("simulate", help="run a simulation grid from a JSON config")
    p_sim.add_argument("config", help="JSON grid config file")
    p_sim.add_argument("--format", default=_env("FORMAT", "csv"), choices=["json", "csv"])
    p_sim.add_argument("--out", default=None, help="output path (default stdout)")
    p_sim.add_argument("--workers", type=int, default=int(_env("WORKERS", "0")),
                       help="worker processes (0 = auto)")
    return parser


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _load(args):
    data = DataMatrix.from_csv(args.data, header=args.header)
    cone = parse_cone(args.cone, data.p, base_dir=os.path.dirname(args.data) or ".")
    return data, cone


def cmd_stat(args) -> int:
    data, cone = _load(args)
    config = {
        "command": "stat",
        "input": args.data,
        "cone": args.cone,
        "estimator": args.estimator,
        "header": args.header,
        "format": args.format,
    }
    m = sample_mean(data)
    cov = covariance_estimator(args.estimator)(data)
    result = conic_statistic(m, cov, cone)
    payload = {
        "statistic": result.statistic,
        "support": list(result.support),
        "path": result.path,
        "maximizer": [float(v) for v in result.maximizer],
    }
    if args.decompose and np.any(result.maximizer):
        lam = result.maximizer
        proj = (float(lam @ m) / float(lam @ lam)) * lam
        stretch = geometric_decomposition(m, cov, result) / max(np.linalg.norm(proj), 1e-300)
        rows = [
            {
                "component": j,
                "lambda_hat": float(lam[j]),
                "projection": float(proj[j]),
                "scaled_projection": float(stretch * proj[j]),
            }
            for j in range(len(lam))
        ]
        _emit(_rows_to_csv(rows), args.out)
        return 0
    if args.format == "json":
        _emit(json.dumps({"config": config, "result": payload}, indent=2) + "\n", args.out)
    else:
        row = {**config, "statistic": payload["statistic"],
               "support": " ".join(map(str, payload["support"])), "path": payload["path"]}
        _emit(_rows_to_csv([row]), args.out)
    return 0


def cmd_test(args) -> int:
    data, cone = _load(args)
    max_group = 2 ** data.n if data.n <= 62 else None
    resamples = args.resamples
    if max_group is not None and resamples > max_group:
        print(
            f"note: {resamples} resamples exceed the reflection group size {max_group}; "
            "using full enumeration",
            file=sys.stderr,
        )
        resamples = max_group
    config = {
        "command": "test",
        "input": args.data,
        "cone": args.cone,
        "estimator": args.estimator,
        "alpha": args.alpha,
        "resamples": resamples,
        "seed": args.seed,
        "header": args.header,
        "format": args.format,
    }
    out = randomization_test(
        data, cone,
        estimator=args.estimator,
        alpha=args.alpha,
        resamples=resamples,
        seed=args.seed,
    )
    payload = {
        "statistic": out.statistic,
        "p_value": out.p_value,
        "critical_value": out.critical_value,
        "reject": out.reject,
        "resamples": out.resamples,
        "failed_resamples": out.failed_resamples,
        "seed": out.seed,
    }
    if args.format == "json":
        _emit(json.dumps({"config": config, "result": payload}, indent=2) + "\n", args.out)
    else:
        _emit(_rows_to_csv([{**config, **payload}]), args.out)
    return 0


def _summary_table(all_rows) -> str:
    """Rejection rates laid out like the reference tables: one block per
    (n, p), one row per rho, one column per test."""
    tests = []
    for row in all_rows:
        if row["test_name"] not in tests:
            tests.append(row["test_name"])
    blocks = {}
    for row in all_rows:
        blocks.setdefault((row["n"], row["p"], row["s"]), {}).setdefault(row["rho"], {})[
            row["test_name"]
        ] = row["reject_rate"]
    lines = []
    for (n, p, s), by_rho in sorted(blocks.items()):
        lines.append(f"n={n} p={p} s={s}")
        lines.append("  " + "rho".rjust(6) + "".join(t.rjust(9) for t in tests))
        for rho in sorted(by_rho):
            cells = "".join(
                (f"{by_rho[rho][t]:.3f}" if t in by_rho[rho] else "-").rjust(9) for t in tests
            )
            lines.append("  " + f"{rho:.2f}".rjust(6) + cells)
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    with open(args.config) as fh:
        grid = json.load(fh)
    configs = grid_configs(grid)
    workers = args.workers if args.workers > 0 else (os.cpu_count() or 1)
    stream = open(args.out, "w") if args.out else sys.stdout
    close_stream = args.out is not None
    all_rows = []
    writer = None
    try:
        for cfg in configs:
            result = run_experiment(cfg, workers=workers)
            rows = result_rows(result)
            all_rows.extend(rows)
            if args.format == "csv":
                if writer is None:
                    writer = csv.DictWriter(stream, fieldnames=list(rows[0].keys()))
                    writer.writeheader()
                writer.writerows(rows)
                stream.flush()
    finally:
        if close_stream:
            stream.close()
    if args.format == "json":
        doc = json.dumps({"grid": grid, "results": all_rows}, indent=2) + "\n"
        _emit(doc, args.out)
    elif args.out:
        with open(args.out + ".json", "w") as fh:
            json.dump({"grid": grid, "results": all_rows}, fh, indent=2)
    sys.stdout.write(_summary_table(all_rows))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "stat":
            return cmd_stat(args)
        if args.command == "test":
            return cmd_test(args)
        return cmd_simulate(args)
    except _DEGENERACY_ERRORS as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        witness = getattr(report, "witness", None)
        if witness is not None:
            print("witness direction: " + " ".join(f"{v:.6g}" for v in np.atleast_1d(witness)),
                  file=sys.stderr)
        return 2
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
