"""Command-line surface: solve, cost, divergence, ci, coverage, rate.

Exit codes: 0 success, 2 usage error, 3 iteration budget exhausted,
4 IO or file-format error. Human-readable tables print 6 significant
digits; machine outputs written via --out carry 17 significant digits so
values round-trip bit for bit.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptySupport,
    EntotError,
    MalformedFile,
    NegativeEntry,
    NonPositiveEps,
    NonSimplexWeights,
    NotConverged,
    NotOptimal,
    OutOfRange,
    UnsupportedOrder,
    WrongNormalization,
)
from .harness import (
    EmitFormat,
    ExperimentKind,
    emit,
    load_config,
    resolve_threads,
    run_experiment,
)
from .inference import ci_two_sample, sinkhorn_divergence
from .measures import load_measure
from .sinkhorn import SolverConfig, cost, solve


def _fmt17(x) -> str:
    return "%.17g" % float(x)


def _fmt6(x) -> str:
    return "%.6g" % float(x)


def _print_table(rows) -> None:
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name.ljust(width)}  {value}")


def _write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("field,index,value\n")
        for field, index, value in records:
            fh.write(f"{field},{index},{value}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entot",
        description="Entropic optimal transport: solving, inference, experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p):
        p.add_argument("--p", required=True, help="first measure file")
        p.add_argument("--q", required=True, help="second measure file")
        p.add_argument("--eps", type=float, required=True, help="regularization")
        p.add_argument("--tol", type=float, default=1e-9, help="marginal residual target")
        p.add_argument("--max-iter", type=int, default=100_000, dest="max_iter")
        p.add_argument("--out", default=None, help="write machine-readable CSV here")

    p_solve = sub.add_parser("solve", help="solve the dual and print diagnostics")
    add_solver_flags(p_solve)

    p_cost = sub.add_parser("cost", help="print the transport cost only")
    add_solver_flags(p_cost)

    p_div = sub.add_parser("divergence", help="debiased divergence (three solves)")
    add_solver_flags(p_div)

    p_ci = sub.add_parser("ci", help="two-sample confidence interval")
    add_solver_flags(p_ci)
    p_ci.add_argument("--alpha", type=float, default=0.05, help="1 - level")

    for name, help_text in (
        ("coverage", "Monte Carlo interval coverage per (d, eps, n) cell"),
        ("rate", "Monte Carlo convergence-rate experiment"),
    ):
        p_exp = sub.add_parser(name, help=help_text)
        p_exp.add_argument("--config", required=True, help="experiment config file")
        p_exp.add_argument("--out", default=None, help="emit results to this file")
        p_exp.add_argument("--format", choices=["csv", "plot"], default="csv")
        p_exp.add_argument("--threads", type=int, default=None,
                           help="replicate parallelism (default: machine; 1 = serial)")
        p_exp.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
    return parser


def _load_inputs(args):
    P = load_measure(args.p)
    Q = load_measure(args.q)
    cfg = SolverConfig(eps=args.eps, tol=args.tol, max_iter=args.max_iter)
    return P, Q, cfg


def _cmd_solve(args) -> int:
    P, Q, cfg = _load_inputs(args)
    pair, report = solve(P, Q, cfg)
    value = cost(P, Q, pair, tol=cfg.tol)
    _print_table([
        ("cost", _fmt6(value)),
        ("dual", _fmt6(report.dual_value)),
        ("iterations", str(report.iterations)),
        ("residual", _fmt6(report.final_residual)),
        ("converged", "yes" if report.converged else "no"),
    ])
    if args.out:
        records = [
            ("cost", "", _fmt17(value)),
            ("dual_value", "", _fmt17(report.dual_value)),
            ("final_residual", "", _fmt17(report.final_residual)),
            ("iterations", "", str(report.iterations)),
            ("converged", "", "1" if report.converged else "0"),
            ("eps", "", _fmt17(cfg.eps)),
        ]
        records += [("f", str(i), _fmt17(v)) for i, v in enumerate(pair.f)]
        records += [("g", str(j), _fmt17(v)) for j, v in enumerate(pair.g)]
        _write_records(args.out, records)
    return 0


def _cmd_cost(args) -> int:
    P, Q, cfg = _load_inputs(args)
    pair, _ = solve(P, Q, cfg)
    value = cost(P, Q, pair, tol=cfg.tol)
    print(_fmt17(value))
    if args.out:
        _write_records(args.out, [("cost", "", _fmt17(value))])
    return 0


def _cmd_divergence(args) -> int:
    P, Q, cfg = _load_inputs(args)
    div = sinkhorn_divergence(P, Q, cfg)
    _print_table([
        ("divergence", _fmt6(div.value)),
        ("s_pq", _fmt6(div.parts[0])),
        ("s_pp", _fmt6(div.parts[1])),
        ("s_qq", _fmt6(div.parts[2])),
        ("eps", _fmt6(div.eps)),
    ])
    if args.out:
        _write_records(args.out, [
            ("divergence", "", _fmt17(div.value)),
            ("s_pq", "", _fmt17(div.parts[0])),
            ("s_pp", "", _fmt17(div.parts[1])),
            ("s_qq", "", _fmt17(div.parts[2])),
            ("eps", "", _fmt17(div.eps)),
        ])
    return 0


def _cmd_ci(args) -> int:
    P, Q, cfg = _load_inputs(args)
    ci = ci_two_sample(P, Q, cfg, args.alpha)
    _print_table([
        ("center", _fmt6(ci.center)),
        ("half_width", _fmt6(ci.half_width)),
        ("low", _fmt6(ci.low)),
        ("high", _fmt6(ci.high)),
        ("level", _fmt6(ci.level)),
        ("variance", _fmt6(ci.variance.value)),
        ("n", str(ci.variance.n)),
        ("m", str(ci.variance.m)),
    ])
    if args.out:
        _write_records(args.out, [
            ("center", "", _fmt17(ci.center)),
            ("half_width", "", _fmt17(ci.half_width)),
            ("low", "", _fmt17(ci.low)),
            ("high", "", _fmt17(ci.high)),
            ("level", "", _fmt17(ci.level)),
            ("variance", "", _fmt17(ci.variance.value)),
            ("n", "", str(ci.variance.n)),
            ("m", "", str(ci.variance.m)),
        ])
    return 0


def _cmd_experiment(args, expect_coverage: bool) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    is_coverage = cfg.kind is ExperimentKind.COVERAGE
    if expect_coverage != is_coverage:
        wanted = "coverage" if expect_coverage else "a rate kind"
        raise ConfigError(f"config kind is {cfg.kind.value}, expected {wanted}")
    threads = resolve_threads(args.threads)
    result = run_experiment(cfg, threads=threads)
    if is_coverage:
        print("d  eps  n  coverage  mean_half_width  evaluated  excluded")
        for c in result.cells:
            print(f"{c.d}  {_fmt6(c.eps)}  {c.n}  {_fmt6(c.coverage)}  "
                  f"{_fmt6(c.mean_half_width)}  {c.evaluated}  {c.excluded}")
    else:
        for curve in result.curves:
            print(f"curve {curve.label} d={curve.d} eps={_fmt6(curve.eps)} "
                  f"slope={_fmt6(curve.slope)} slope_se={_fmt6(curve.slope_se)}")
            for p in curve.points:
                print(f"  n={p.n}  mean={_fmt6(p.mean)}  sd={_fmt6(p.sd)}  "
                      f"evaluated={p.evaluated}  excluded={p.excluded}")
    if args.out:
        fmt = EmitFormat.CSV_TABLE if args.format == "csv" else EmitFormat.PLOT_DATA
        emit(result, args.out, fmt)
    return 0


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "cost":
            return _cmd_cost(args)
        if args.command == "divergence":
            return _cmd_divergence(args)
        if args.command == "ci":
            return _cmd_ci(args)
        if args.command == "coverage":
            return _cmd_experiment(args, expect_coverage=True)
        return _cmd_experiment(args, expect_coverage=False)
    except NotConverged as exc:
        print(f"entot: not converged: {exc}", file=sys.stderr)
        return 3
    except (OSError, MalformedFile, NonSimplexWeights, EmptySupport,
            ConfigError, DimensionMismatch) as exc:
        print(f"entot: {exc}", file=sys.stderr)
        return 4
    except (OutOfRange, NonPositiveEps, NotOptimal, NegativeEntry,
            UnsupportedOrder, WrongNormalization, EntotError, ValueError) as exc:
        print(f"entot: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
