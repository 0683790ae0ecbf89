"""Command line entry point: ``nlmaxwell {solve,check,export,info}``.

Exit codes: 0 success, 1 validation or convergence failure, 2 I/O or parse
error.  Diagnostics go to standard error; results go to standard output or
to the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import fieldio
from .config import ConfigError, load_config
from .dual_energy import div_residual
from .solver import StepCollapseError, reconstruct_primal, solve_ground_state, solve_multi_seed

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
P_FILE, E_FILE = "P_star.nmx", "E_star.nmx"

log = logging.getLogger("nlmaxwell")


def _cmd_solve(args) -> int:
    try:
        run = load_config(args.config)
    except (ConfigError, OSError) as exc:
        log.error("config: %s", exc)
        return EXIT_IO
    for w in run.warnings:
        log.warning("%s", w)
    out = Path(args.out or run.output_dir)
    t0 = time.perf_counter()
    try:
        if run.seeds:
            P, rep, _ = solve_multi_seed(run.grid, run.model, run.solver, run.seeds, workers=run.workers)
        else:
            P, rep = solve_ground_state(run.grid, run.model, run.solver)
    except (OSError, fieldio.FieldFileError) as exc:
        log.error("cannot read the initial field: %s", exc)
        return EXIT_IO
    except (ValueError, StepCollapseError) as exc:
        log.error("solve failed: %s", exc)
        return EXIT_FAIL
    rep.workers = run.workers
    log.info("solve took %.1f s", time.perf_counter() - t0)

    from .report import write_report

    try:
        out.mkdir(parents=True, exist_ok=True)
        E = reconstruct_primal(P, run.model)
        fieldio.write_field(P, fieldio.KIND_DUAL, out / P_FILE)
        fieldio.write_field(E, fieldio.KIND_PRIMAL, out / E_FILE)
        path = write_report(rep, out, run.echo())
        if not args.no_figures:
            from .plotting import write_figures

            write_figures(rep, P, E, out)
    except OSError as exc:
        log.error("cannot write results: %s", exc)
        return EXIT_IO
    log.info("report written to %s", path)
    print(f"c_level: {rep.c_level!r}")
    print(f"dual_residual: {rep.dual_residual!r}")
    print(f"status: {'CONVERGED' if rep.converged else 'FAILED'} ({rep.message})")
    return EXIT_OK if rep.converged else EXIT_FAIL


def _cmd_check(args) -> int:
    from .checks import run_checks

    t0 = time.perf_counter()
    results = run_checks(args.level, seed=args.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def _cmd_export(args) -> int:
    try:
        rows = fieldio.export_slice(args.field, args.axis, args.index, args.out)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, fieldio.FieldFileError):
            log.error("%s", exc)
            return EXIT_IO
        log.error("%s", exc)
        return EXIT_FAIL
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    log.info("wrote %d rows to %s", rows, args.out)
    return EXIT_OK


def _cmd_info(args) -> int:
    try:
        f, kind = fieldio.read_field_with_kind(args.field)
    except (OSError, fieldio.FieldFileError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    mag = f.magnitude()
    print(f"magic: {fieldio.MAGIC.decode()}")
    print(f"version: {fieldio.VERSION}")
    print(f"n: {f.grid.n}")
    print(f"l: {f.grid.l!r}")
    print(f"kind: {kind} ({fieldio.KIND_NAMES[kind]})")
    print(f"l2_norm: {f.norm()!r}")
    print(f"max_magnitude: {float(np.max(mag))!r}")
    print(f"div_residual: {div_residual(f)!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlmaxwell", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute a ground state from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("check", help="run the invariant suites")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("export", help="write one plane of a field file as CSV")
    p.add_argument("field")
    p.add_argument("--axis", choices=("x", "y", "z"), default="z")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("info", help="print a field file header and norms")
    p.add_argument("field")
    p.set_defaults(func=_cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the parse-error code
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
