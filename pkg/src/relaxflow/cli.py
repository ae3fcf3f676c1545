"""Command-line front end: convergence sweeps, profile runs, tableau checks,
and standalone limit solves.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .tableau import (
    SchemeKind,
    TableauError,
    attained_order,
    builtin,
    classify,
    is_globally_stiffly_accurate,
    parse_tableau_file,
)

_KIND_LABEL = {
    SchemeKind.TYPE_A: "A",
    SchemeKind.TYPE_CK: "CK",
    SchemeKind.TYPE_ARS: "ARS",
    SchemeKind.UNCLASSIFIED: "unclassified",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaxflow",
        description="IMEX solvers for hyperbolic systems with stiff "
                    "relaxation and their diffusion limits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("converge", help="run a convergence sweep")
    conv.add_argument("preset", help="preset name, e.g. kl_table1b")
    conv.add_argument("--out", help="CSV output path (stdout table otherwise)")
    conv.add_argument("--override", action="append", default=[],
                      metavar="KEY=VALUE",
                      help="override eps, C, T, N, scheme, tableau_file")
    conv.set_defaults(func=_cmd_converge)

    run = sub.add_parser("run", help="single-resolution profile run")
    run.add_argument("preset")
    run.add_argument("--out", default=".", help="output directory")
    run.set_defaults(func=_cmd_run)

    tab = sub.add_parser("tableau", help="tableau utilities")
    tab_sub = tab.add_subparsers(dest="tableau_command", required=True)
    check = tab_sub.add_parser("check", help="classify a pair")
    check.add_argument("source", help="builtin name or tableau file path")
    check.set_defaults(func=_cmd_tableau_check)

    lim = sub.add_parser("limit", help="reference solve of a limit equation")
    lim.add_argument("model", choices=("kl", "linear", "euler", "m1"))
    lim.add_argument("--n", type=int, default=384)
    lim.add_argument("--t-final", type=float, default=1.0)
    lim.add_argument("--m", type=float, default=2.0,
                     help="relaxation exponent (kl/linear)")
    lim.add_argument("--out", help="CSV output path")
    lim.set_defaults(func=_cmd_limit)

    return parser


def _print_report(report: harness.ConvergenceReport):
    for key, value in report.metadata.items():
        print(f"# {key}={value}")
    head = f"{'n':>5} {'dt':>12} {'err_linf':>12} {'order':>7} " \
           f"{'err_l2':>12} {'order':>7} {'err_l1':>12} {'order':>7}  status"
    print(head)
    def ordf(x):
        return "      -" if x is None else f"{x:7.3f}"

    def errf(x):
        return "           -" if x is None else f"{x:12.4e}"

    for r in report.rows:
        print(f"{r.n:>5} {r.dt:>12.4e} {errf(r.err_linf)} {ordf(r.order_linf)} "
              f"{errf(r.err_l2)} {ordf(r.order_l2)} "
              f"{errf(r.err_l1)} {ordf(r.order_l1)}  {r.status}")


def _convergence_gnuplot(csv_path: str) -> str:
    return "\n".join([
        'set datafile separator ","',
        "set logscale xy",
        'set xlabel "n"',
        'set ylabel "relative error"',
        f'plot "{os.path.basename(csv_path)}" using 1:3 with linespoints '
        'title "Linf", \\',
        f'     "{os.path.basename(csv_path)}" using 1:4 with linespoints '
        'title "L2", \\',
        f'     "{os.path.basename(csv_path)}" using 1:5 with linespoints '
        'title "L1"',
        "pause -1",
        "",
    ])


def _cmd_converge(args) -> int:
    try:
        config = harness.preset(args.preset)
        config = harness.apply_overrides(config, args.override)
    except (ValueError, TableauError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        report = harness.convergence_study(config)
    except (FloatingPointError, RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if args.out:
        report.to_csv(args.out)
        with open(args.out + ".gnuplot", "w") as fh:
            fh.write(_convergence_gnuplot(args.out))
        print(f"wrote {args.out}")
    else:
        _print_report(report)
    if not report.ok():
        for r in report.rows:
            if r.status != "ok":
                print(f"n={r.n}: {r.status}", file=sys.stderr)
        return 2
    return 0


def _cmd_run(args) -> int:
    try:
        config = harness.preset(args.preset)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        result = harness.run_experiment(config, out_dir=args.out)
    except (FloatingPointError, RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    for label, path in result.files.items():
        print(f"wrote {path}  [{label}]")
    state = "UNSTABLE" if result.unstable else "stable"
    print(f"total-variation verdict: {state} "
          f"(final/min ratio {result.instability_ratio:.3f})")
    for name, drift in result.conservation_drift.items():
        print(f"conserved total {name}: relative drift {drift:.3e}")
    return 0


def _cmd_tableau_check(args) -> int:
    try:
        if os.path.exists(args.source):
            pair = parse_tableau_file(args.source)
        else:
            pair = builtin(args.source)
    except (TableauError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    kind = classify(pair)
    gsa = is_globally_stiffly_accurate(pair)
    order = attained_order(pair)
    print(f"type={_KIND_LABEL[kind.kind]} gsa={'true' if gsa else 'false'} "
          f"order>={order}")
    if pair.name:
        print(f"name: {pair.name}")
    print(f"stages: {pair.explicit.s}")
    b_match = float(np.max(np.abs(pair.implicit.b - pair.explicit.b)))
    print(f"matching output weights (b = b~): "
          f"{'true' if b_match <= 1e-14 else 'false'}")
    return 0


def _cmd_limit(args) -> int:
    base = {
        "kl": harness.preset("kl_table1b"),
        "linear": harness.preset("kl_table1b"),
        "euler": harness.preset("euler_fig1"),
        "m1": harness.preset("m1_fig2"),
    }[args.model]
    config = replace(base, preset=f"limit_{args.model}", model=args.model,
                     m=args.m, t_final=args.t_final, n_list=(args.n,),
                     ref_n=args.n, ref_dt=None)
    try:
        field = harness.reference_solution(config, args.n)
    except (FloatingPointError, RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    names = harness.make_limit_problem(config).component_names
    if args.out:
        x = field.grid.cells()
        harness._write_profile_csv(
            args.out, x,
            {names[j]: field.values[:, j] for j in range(field.k)})
        print(f"wrote {args.out}")
    else:
        dx = field.grid.dx
        for j, name in enumerate(names):
            col = field.values[:, j]
            print(f"{name}: min={col.min():.6e} max={col.max():.6e} "
                  f"mass={float(col.sum() * dx):.10e}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; our contract reserves 2 for
        # numerical failures and 1 for usage
        code = exc.code if exc.code is not None else 0
        return 1 if code == 2 else int(code)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
