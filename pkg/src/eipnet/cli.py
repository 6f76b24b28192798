"""Command-line interface: ``eipnet solve | sweep | verify | export-model``.

Exit codes: 0 optimal or verified, 1 usage or validation error, 2 limit
reached, 3 verification failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .analysis import MonotonicityError, alpha_sweep, build_report, epsilon_sweep, make_grid
from .engine import Status
from .engine.lpformat import write_lp
from .equilibrium import PhysicalInfeasibility, verify_equilibrium
from .io import (
    InstanceFileError, SolutionFileError, load_instance, load_solution, save_solution, to_dot,
    write_flux_csv,
)
from .model import InstanceError
from .reduction import (
    BIGM_MODES, DEFAULT_EPSILON, SolveFailure, build, extract_network, solve_methodology,
)

EXIT_OK, EXIT_USAGE, EXIT_LIMIT, EXIT_UNVERIFIED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _add_instance(p, required=True):
    p.add_argument("--instance", required=required,
                   help="instance JSON path or bundled name (eip15, eip10)")
    p.add_argument("--alpha", type=float, help="override the contract coefficient")


def _add_limits(p):
    p.add_argument("--engine", choices=("internal", "external"), default="internal")
    p.add_argument("--time-limit", type=_positive(float), help="seconds per MIP solve")
    p.add_argument("--node-limit", type=_positive(int), help="nodes per MIP solve")
    p.add_argument("--gap-tol", type=float, default=1e-6, help="relative MIP gap")
    p.add_argument("--int-tol", type=float, default=1e-6, help="integrality tolerance")
    p.add_argument("--bigm", choices=BIGM_MODES, default="tight")
    p.add_argument("--threads", type=_positive(int), default=1,
                   help="worker processes for sweeps (default 1)")


def _limits(args) -> dict:
    return {"time_limit": args.time_limit, "node_limit": args.node_limit,
            "gap_tol": args.gap_tol, "int_tol": args.int_tol}


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eipnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="design the optimal exchange network")
    _add_instance(p)
    p.add_argument("--epsilon", type=_positive(float), default=DEFAULT_EPSILON)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--no-select", action="store_true",
                   help="keep the first optimum even if it fails the equilibrium audit")
    _add_limits(p)

    p = sub.add_parser("sweep", help="sensitivity sweep over alpha or epsilon")
    _add_instance(p)
    p.add_argument("--param", choices=("alpha", "epsilon"), required=True)
    p.add_argument("--min", type=float, required=True, dest="lo")
    p.add_argument("--max", type=float, required=True, dest="hi")
    p.add_argument("--step", type=float, help="grid step (linear grid)")
    p.add_argument("--values", help="comma-separated grid, instead of min/max/step")
    p.add_argument("--epsilon", type=_positive(float), default=DEFAULT_EPSILON)
    p.add_argument("--no-verify", action="store_true", help="skip the equilibrium audit")
    p.add_argument("--out", help="CSV path (default: standard output)")
    _add_limits(p)

    p = sub.add_parser("verify", help="audit a solution file for equilibrium")
    _add_instance(p)
    p.add_argument("--solution", required=True)
    p.add_argument("--tol", type=float, default=1e-5, help="relative cost tolerance")
    p.add_argument("--abs-tol", type=float, default=0.0, help="absolute cost tolerance")
    p.add_argument("--feas-tol", type=float, default=1e-6, help="physical feasibility tolerance")

    p = sub.add_parser("export-model", help="write the MIP in LP text format")
    _add_instance(p)
    p.add_argument("--variant", choices=("gap", "epsilon"), default="epsilon")
    p.add_argument("--epsilon", type=_positive(float), default=DEFAULT_EPSILON)
    p.add_argument("--bigm", choices=BIGM_MODES, default="tight")
    p.add_argument("--out", help="LP path (default: standard output)")
    return parser


def cmd_solve(args) -> int:
    inst = load_instance(args.instance, args.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = solve_methodology(inst, args.epsilon, args.engine, bigm=args.bigm,
                            select=not args.no_select, **_limits(args))
    sol = res.eps_solution
    limited = sol.status is not Status.OPTIMAL or res.gap_solution.status is not Status.OPTIMAL
    if sol.x is None:
        print(f"status: {sol.status.value}")
        print(f"best bound: {res.z_bar:.6f}")
        print("no incumbent found; nothing written")
        return EXIT_LIMIT
    op = res.operation()
    edges = extract_network(op)
    audit = res.selection.audit if res.selection is not None else None
    if audit is None:
        try:
            audit = verify_equilibrium(op, edges, inst)
        except PhysicalInfeasibility as exc:
            logging.getLogger(__name__).warning("audit skipped: %s", exc)
    report = build_report(inst, op, res, audit, edges)
    meta = {"alpha": inst.alpha, "epsilon": args.epsilon, "status": sol.status.value,
            "z_bar": res.z_bar, "z_eps": res.z_eps}
    save_solution(out / "solution.json", op, inst, edges, **meta)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    text = report.to_text()
    (out / "report.txt").write_text(text)
    write_flux_csv(out / "flux.csv", op)
    (out / "network.dot").write_text(to_dot(op, edges))
    print(text, end="")
    if limited:
        bound = min(res.z_bar, sol.bound) if not math.isnan(sol.bound) else res.z_bar
        print(f"best bound: {bound:.6f}")
        return EXIT_LIMIT
    return EXIT_OK


def cmd_sweep(args) -> int:
    inst = load_instance(args.instance, args.alpha)
    if args.values:
        grid = [float(v) for v in args.values.split(",")]
    elif args.step is None:
        raise ValueError("give --step or --values")
    else:
        grid = make_grid(args.lo, args.hi, args.step)
    limits = _limits(args)
    if args.param == "alpha":
        res = alpha_sweep(inst, grid, args.epsilon, args.engine, workers=args.threads,
                          verify=not args.no_verify, **limits)
    else:
        res = epsilon_sweep(inst, grid, args.engine, **limits)
    text = res.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    if any(p.status != Status.OPTIMAL.value for p in res.points):
        return EXIT_LIMIT
    if any(p.equilibrium is False for p in res.points):
        return EXIT_UNVERIFIED
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = json.loads(Path(args.solution).read_text()) if Path(args.solution).is_file() else {}
    alpha = args.alpha if args.alpha is not None else doc.get("alpha")
    inst = load_instance(args.instance, alpha)
    op, edges, _ = load_solution(args.solution, inst)
    if edges is None:
        edges = extract_network(op)
    try:
        audit = verify_equilibrium(op, edges, inst, rel_tol=args.tol, abs_tol=args.abs_tol,
                                   feas_tol=args.feas_tol)
    except PhysicalInfeasibility as exc:
        print(f"physically infeasible: {exc}")
        return EXIT_UNVERIFIED
    print(f"{'Ent':>4} {'cost':>10} {'best reply':>11}  {'mode':<17} verdict")
    for c in audit:
        print(f"{c.enterprise:>4} {c.current_cost:10.2f} {c.best_cost:11.2f}  "
              f"{c.mode:<17} {c.verdict.value}")
    ok = audit.is_equilibrium
    print("equilibrium: " + ("verified" if ok else "NOT verified"))
    return EXIT_OK if ok else EXIT_UNVERIFIED


def cmd_export(args) -> int:
    inst = load_instance(args.instance, args.alpha)
    rp = build(inst, args.variant, args.epsilon, bigm=args.bigm)
    text = write_lp(rp.model)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify,
            "export-model": cmd_export}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MonotonicityError as exc:
        print(f"eipnet: verification failed: {exc}", file=sys.stderr)
        return EXIT_UNVERIFIED
    except (InstanceFileError, InstanceError, SolutionFileError, ValueError, OSError) as exc:
        print(f"eipnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolveFailure as exc:
        print(f"eipnet: solver failure: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
