"""Command line entry point: ``degenlab run|check|oracle|grid``."""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .analysis import (ClosedFormHJ, closed_form_derivative, closed_form_hj1d,
                       closed_form_residual)
from .errors import DegenlabError, IoError, ParseError, ValidationError
from .geometry import build_grid
from .harness.config import load_scenario
from .harness.experiments import DEFAULT_DELTAS, DEFAULT_GAMMAS, run_experiment
from .harness.report import ReportVerdict, write_report
from .operators import check_f3, check_f4, f6_report, lemma_f5_constants

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return load_scenario(text)


def cmd_run(args):
    s = _load(args.config)
    report = run_experiment(s)
    out = args.output or s.output
    write_report(report, out)
    for r in report.rows:
        status = "" if r.passed is None else ("PASS" if r.passed else "FAIL")
        n = "" if r.n is None else f"n={r.n} "
        print(f"{n}{r.quantity} = {r.value} {r.threshold or ''} {status}".rstrip())
    print(f"verdict: {report.verdict.value} ({report.wall_time:.2f} s) -> {out}")
    return EXIT_FAIL if report.verdict is ReportVerdict.FAIL else EXIT_OK


def cmd_check(args):
    s = _load(args.config)
    p = s.params
    if args.condition == "f3":
        rep = check_f3(s.operator, s.domain, p.get("gammas", DEFAULT_GAMMAS),
                       p.get("deltas", DEFAULT_DELTAS))
    elif args.condition == "f4":
        rep = check_f4(s.operator, s.domain, p.get("f4_samples", 200),
                       p.get("radii", tuple(2.0 ** -k for k in range(1, 13))))
    else:
        rep = lemma_f5_constants(p.get("sigma_lip", 1.0), p.get("sigma_over_d", 1.0),
                                 p.get("psi_lip", 1.0), p.get("psi_over_d", 1.0),
                                 p.get("L2", 1.0), s.domain.max_distance)
        sys.stdout.write(rep.to_csv())
        c = rep.constants
        print(f"constants: " + ", ".join(f"{k}={v}" for k, v in c.items()))
        rep = f6_report(c["L1"], c["L2"], c["D"])
    sys.stdout.write(rep.to_csv())
    print(f"verdict: {rep.verdict.value}")
    if rep.note:
        print(f"note: {rep.note}")
    return EXIT_OK


def cmd_oracle(args):
    try:
        cf = ClosedFormHJ(args.m, args.mu)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if args.n < 2:
        raise ValidationError("--n must be at least 2")
    x = 2.0 * np.arange(1, args.n) / args.n
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["x", "u", "du", "residual"])
    for row in zip(x, closed_form_hj1d(cf, x), closed_form_derivative(cf, x),
                   closed_form_residual(cf, x)):
        w.writerow([f"{float(v):.17g}" for v in row])
    return EXIT_OK


def cmd_grid(args):
    s = _load(args.config)
    w = csv.writer(sys.stdout, lineterminator="\n")
    for n in s.grid_sizes:
        grid = build_grid(s.domain, n)
        xs = ["x"] if grid.dim == 1 else [f"x{k}" for k in range(grid.dim)]
        w.writerow(["n", "node_id", *xs, "d", "is_layer"])
        for i in range(grid.size):
            w.writerow([n, i, *(f"{c:.17g}" for c in grid.coords[i]), f"{grid.d[i]:.17g}",
                        "true" if grid.is_layer[i] else "false"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degenlab",
                                     description="Boundary-degenerate PDE experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment of a scenario file and write a report")
    run.add_argument("config")
    run.add_argument("--output", "-o", help="report directory (default: experiment.output)")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="structural condition checks")
    check.add_argument("condition", choices=("f3", "f4", "constants"))
    check.add_argument("config")
    check.set_defaults(func=cmd_check)

    oracle = sub.add_parser("oracle", help="reference solutions")
    oracle_sub = oracle.add_subparsers(dest="oracle", required=True)
    cf = oracle_sub.add_parser("closed-form", help="sampled closed form of u + d^mu |u'|^m = 0 on (0, 2)")
    cf.add_argument("--m", type=float, required=True)
    cf.add_argument("--mu", type=float, required=True)
    cf.add_argument("--n", type=int, required=True)
    cf.set_defaults(func=cmd_oracle)

    grid = sub.add_parser("grid", help="dump the grids of a scenario")
    grid.add_argument("config")
    grid.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DegenlabError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
