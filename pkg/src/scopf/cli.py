"""Command line front end.

Subcommands: validate, solve, verify, screen, bench, report, convert.

Exit codes: 0 on success, 2 for invalid input (unparseable or inconsistent
case data), 3 for solver failures (infeasible, nonconverged, or a solution
that fails verification), 64 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .cases import get_case, nominal_injections
from .contingency import contingency_list, screen_and_rank
from .errors import (CaseParseError, ConvergenceError, LPError,
                     LPInfeasibleError, ScopfError)
from .network import (apply_reliability_csv, apply_voll_csv, save_case,
                      validate, validation_errors)
from .scopf import (ScopfConfig, VARIANTS, solution_from_dict, solve_monolithic,
                    solve_scopf, to_canonical_json, verify_solution)
from . import linalg

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_FAILED = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_network(args):
    net = get_case(args.case)
    if getattr(args, "reliability", None):
        net = apply_reliability_csv(net, args.reliability)
    if getattr(args, "voll", None):
        net = apply_voll_csv(net, args.voll)
    return net


def _require_valid(net) -> None:
    errors = validation_errors(net)
    if errors:
        for v in errors:
            print(f"error: {v.code}: {v.message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID_INPUT)


def _config(args) -> ScopfConfig:
    return ScopfConfig(variant=args.variant,
                       gamma_fraction=args.gamma_fraction,
                       lp_backend=args.backend,
                       max_iterations=args.max_iterations,
                       include_islanding=not args.no_islanding)


def _add_case_arg(p) -> None:
    p.add_argument("case", help="case name (ieee_rts24), synthetic:<buses>:<seed>, "
                                "or a path to a .json/.m file")
    p.add_argument("--reliability", help="CSV overriding branch outage data")
    p.add_argument("--voll", help="CSV overriding demand values of lost load")


def _add_solve_args(p) -> None:
    p.add_argument("--variant", choices=VARIANTS, default="corrective")
    p.add_argument("--gamma-fraction", type=float, default=0.02,
                   dest="gamma_fraction",
                   help="per-state shedding cap as a fraction of total load")
    p.add_argument("--backend", choices=("highs", "simplex"), default="highs")
    p.add_argument("--max-iterations", type=int, default=80, dest="max_iterations")
    p.add_argument("--no-islanding", action="store_true", dest="no_islanding",
                   help="drop islanding outages from the contingency set")


def cmd_validate(args) -> int:
    try:
        net = _load_network(args)
    except (CaseParseError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    findings = validate(net)
    for v in findings:
        print(f"{v.severity}: {v.code}: {v.message}")
    errors = [v for v in findings if v.severity == "error"]
    print(f"{net.name or args.case}: {net.n_buses} buses, {net.n_branches} branches, "
          f"{len(net.generators)} generators, {len(net.demands)} demands; "
          f"{len(errors)} errors, {len(findings) - len(errors)} warnings")
    return EXIT_INVALID_INPUT if errors else EXIT_OK


def cmd_solve(args) -> int:
    try:
        net = _load_network(args)
    except (CaseParseError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    _require_valid(net)
    cfg = _config(args)
    try:
        sol = solve_monolithic(net, cfg) if args.monolithic else solve_scopf(net, cfg)
    except LPInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.diagnosis:
            print(json.dumps(exc.diagnosis, sort_keys=True), file=sys.stderr)
        return EXIT_FAILED
    except (ConvergenceError, LPError) as exc:
        return _fail(EXIT_FAILED, str(exc))
    text = to_canonical_json(sol)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"{sol.variant} objective {sol.objective:.6f} "
              f"({len(sol.iterations)} iterations, {sol.total_cuts} cuts, "
              f"{sol.lp_vars} vars) -> {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        net = _load_network(args)
        with open(args.solution) as fh:
            sol = solution_from_dict(json.load(fh))
    except (CaseParseError, FileNotFoundError, ValueError, KeyError,
            json.JSONDecodeError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    _require_valid(net)
    cfg = ScopfConfig(variant=sol.variant, gamma_fraction=sol.gamma_fraction,
                      include_islanding=not args.no_islanding)
    report = verify_solution(net, sol, cfg)
    if report.ok:
        print(f"verification passed: objective {report.recomputed_objective:.6f}, "
              f"max flow excess {report.max_flow_excess_mw:.3e} MW, "
              f"max balance error {report.max_balance_error_mw:.3e} MW")
        return EXIT_OK
    print(f"verification failed: {len(report.violations)} findings")
    for v in report.violations[:50]:
        print(f"  {v['state']}: {v['kind']} {v['element']} ({v['magnitude']:.6g})")
    if len(report.violations) > 50:
        print(f"  ... and {len(report.violations) - 50} more")
    return EXIT_FAILED


def cmd_screen(args) -> int:
    try:
        net = _load_network(args)
    except (CaseParseError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    _require_valid(net)
    S = linalg.build_matrices(net)
    inj = nominal_injections(net)
    cons = contingency_list(net, exclude_islanding=args.no_islanding)
    ranked = screen_and_rank(net, S, inj, cons)
    rows = [{"rank": i, "branch_id": r.contingency.branch_id,
             "kind": r.contingency.kind, "max_ratio": r.max_ratio,
             "worst_branch": r.worst_branch}
            for i, r in enumerate(ranked)]
    if args.output:
        from .report import write_delimited
        write_delimited(args.output, rows)
        print(f"{len(rows)} outages -> {args.output}")
    else:
        print(f"{'rank':>4} {'branch':>6} {'kind':>16} {'max_ratio':>10} {'worst':>6}")
        for r in rows:
            print(f"{r['rank']:>4} {r['branch_id']:>6} {r['kind']:>16} "
                  f"{r['max_ratio']:>10.4f} {r['worst_branch']:>6}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import benchmark_methods, benchmark_solver
    try:
        net = _load_network(args)
    except (CaseParseError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    _require_valid(net)
    bench = benchmark_methods(net, warm=not args.cold)
    for k, v in bench.summary().items():
        print(f"{k}: {v}")
    if args.output:
        from .report import write_delimited
        write_delimited(args.output, bench.as_dicts())
        print(f"per-outage rows -> {args.output}")
    if args.phases:
        cfg = _config(args)
        sb = benchmark_solver(net, cfg)
        print(json.dumps(sb.as_dict(), sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_report
    from .bench import benchmark_methods
    try:
        net = _load_network(args)
    except (CaseParseError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    _require_valid(net)
    cfg = _config(args)
    if args.solution:
        try:
            with open(args.solution) as fh:
                sol = solution_from_dict(json.load(fh))
        except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
            return _fail(EXIT_INVALID_INPUT, str(exc))
    else:
        try:
            sol = solve_scopf(net, cfg)
        except LPInfeasibleError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            if exc.diagnosis:
                print(json.dumps(exc.diagnosis, sort_keys=True), file=sys.stderr)
            return EXIT_FAILED
        except (ConvergenceError, LPError) as exc:
            return _fail(EXIT_FAILED, str(exc))
    bench = benchmark_methods(net) if args.bench else None
    case_path = args.case if args.case.endswith((".json", ".m")) else None
    manifest = render_report(net, sol, args.output, config=cfg, bench=bench,
                             case_path=case_path)
    print(f"report with {len(manifest['outputs'])} files -> {args.output}")
    return EXIT_OK


def cmd_convert(args) -> int:
    try:
        net = _load_network(args)
    except (CaseParseError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INVALID_INPUT, str(exc))
    _require_valid(net)
    save_case(net, args.output)
    print(f"{net.name or args.case}: {net.n_buses} buses -> {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scopf",
                     description="probabilistic security-constrained dispatch")
    parser.add_argument("--version", action="version", version=f"scopf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check case data consistency")
    _add_case_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve a dispatch variant")
    _add_case_arg(p)
    _add_solve_args(p)
    p.add_argument("-o", "--output", help="write the solution JSON here "
                                          "(default: stdout)")
    p.add_argument("--monolithic", action="store_true",
                   help="use the all-at-once cross-check formulation")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-audit a solution file against its case")
    _add_case_arg(p)
    p.add_argument("solution", help="solution JSON produced by solve")
    p.add_argument("--no-islanding", action="store_true", dest="no_islanding")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("screen", help="rank outages by post-outage loading")
    _add_case_arg(p)
    p.add_argument("--no-islanding", action="store_true", dest="no_islanding")
    p.add_argument("-o", "--output", help="write ranking CSV here")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("bench", help="time the outage evaluation paths")
    _add_case_arg(p)
    _add_solve_args(p)
    p.add_argument("--cold", action="store_true",
                   help="skip the cache warm-up pass before timing")
    p.add_argument("--phases", action="store_true",
                   help="also time one iterative solve by phase")
    p.add_argument("-o", "--output", help="write per-outage timing CSV here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="solve and render tables, figures, manifest")
    _add_case_arg(p)
    _add_solve_args(p)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--solution", help="render this solution JSON instead of solving")
    p.add_argument("--bench", action="store_true",
                   help="include method timing table and figure")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("convert", help="rewrite a case in the native JSON format")
    _add_case_arg(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScopfError as exc:
        return _fail(EXIT_FAILED, str(exc))


if __name__ == "__main__":
    sys.exit(main())
