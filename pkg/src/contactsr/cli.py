"""Command line surface: ``contact-sr derive|run|verify <file> [options]``.

Exit codes form a stable contract:

    0   success (for ``run``: every residual under its documented threshold)
    2   the constraint algorithm found inconsistent dynamics
    3   a constraint could not be reduced to a designated variable
    4   a run finished but some invariant residual exceeded its threshold
    1   anything else (bad input, missing file, missing golden, failed check)

``CONTACT_SR_SEED`` overrides the probabilistic zero-test seed; ``--seed``
overrides both.
"""

from __future__ import annotations

import argparse
import sys as _sys
from pathlib import Path

from .errors import (
    ContactSRError,
    InconsistentDynamics,
    InitOffConstraint,
    MissingGolden,
    ReductionFailure,
    SchemaError,
)
from .geometry import hessian
from .reporting import compare_to_golden, derive_report, load_golden
from .sampling import default_seed
from .simulate import (
    export_csv,
    integrate,
    reduce as reduce_solution,
    report_violations,
    thresholds_for,
    verify,
)
from .systemfile import load_system
from .unified import run_constraint_algorithm

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONSISTENT = 2
EXIT_REDUCTION = 3
EXIT_RESIDUALS = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contact-sr",
        description="Derive, integrate and check dissipative Lagrangian dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="system definition file")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for the probabilistic zero test")
    common.add_argument("--gauge", action="append", default=[],
                        metavar="NAME=EXPR",
                        help="expression for a free unknown (repeatable)")

    sub.add_parser("derive", parents=[common],
                   help="run the constraint algorithm and print the ladder report")

    run = sub.add_parser("run", parents=[common],
                         help="integrate the reduced dynamics and check invariants")
    run.add_argument("--t-final", type=float, default=10.0)
    run.add_argument("--dt", type=float, default=1e-3)
    run.add_argument("--out", type=Path, default=None,
                     help="write the trajectory CSV here")

    sub.add_parser("verify", parents=[common],
                   help="check the derivation against the golden sidecar file")
    return parser


def _parse_gauge(pairs):
    from .parsing import parse_expr

    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise SchemaError(f"--gauge expects NAME=EXPR, got {pair!r}")
        name, _, src = pair.partition("=")
        out[name.strip()] = parse_expr(src.strip())
    return out


def cmd_derive(args) -> int:
    loaded = load_system(args.file)
    seed = args.seed if args.seed is not None else default_seed()
    hess = hessian(loaded.system, seed=seed)
    sol = run_constraint_algorithm(loaded.system, seed=seed)
    print(derive_report(sol, hess.rank), end="")
    return EXIT_OK


def cmd_run(args) -> int:
    loaded = load_system(args.file)
    seed = args.seed if args.seed is not None else default_seed()
    gauge = dict(loaded.gauge)
    gauge.update(_parse_gauge(args.gauge))
    sol = run_constraint_algorithm(loaded.system, seed=seed)
    rs = reduce_solution(sol, gauge)
    init = dict(loaded.init)
    traj = integrate(rs, init, args.t_final, args.dt)
    report = verify(traj, loaded.system, sol)
    if args.out is not None:
        export_csv(traj, args.out)
        print(f"trajectory: {args.out}")
    bounds = thresholds_for(report)
    for family, bound in bounds.items():
        print(f"residual {family}: max {report.worst(family):.3e}"
              f" (threshold {bound:.3e})")
    violations = report_violations(report)
    for family, worst, bound in violations:
        print(f"THRESHOLD EXCEEDED {family}: {worst:.3e} > {bound:.3e}")
    return EXIT_RESIDUALS if violations else EXIT_OK


def cmd_verify(args) -> int:
    loaded = load_system(args.file)
    seed = args.seed if args.seed is not None else default_seed()
    golden = load_golden(Path(args.file))
    sol = run_constraint_algorithm(loaded.system, seed=seed)
    items = compare_to_golden(sol, golden, seed=seed)
    ok = 0
    for item in items:
        status = "pass" if item.ok else "FAIL"
        detail = f"  ({item.detail})" if item.detail and not item.ok else ""
        print(f"{status}: {item.label}{detail}")
        ok += item.ok
    print(f"{ok}/{len(items)} checks passed")
    return EXIT_OK if ok == len(items) else EXIT_ERROR


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "derive":
            return cmd_derive(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except InconsistentDynamics as exc:
        print(f"inconsistent dynamics: {exc}", file=_sys.stderr)
        return EXIT_INCONSISTENT
    except ReductionFailure as exc:
        print(f"reduction failure: {exc}", file=_sys.stderr)
        return EXIT_REDUCTION
    except InitOffConstraint as exc:
        print(f"init off constraint: {exc}", file=_sys.stderr)
        return EXIT_ERROR
    except MissingGolden as exc:
        print(f"missing golden: {exc}", file=_sys.stderr)
        return EXIT_ERROR
    except (ContactSRError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
