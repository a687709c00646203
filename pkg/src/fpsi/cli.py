"""Command-line entry point.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

from .errors import FPSIError
from .io import write_csv

log = logging.getLogger("fpsi")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _threads():
    """Cap BLAS/LAPACK threads from SOLVER_THREADS when set."""
    value = os.environ.get("SOLVER_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"SOLVER_THREADS must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError("SOLVER_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fpsi", description="Coupled Stokes / poroelastic flow solver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("convergence-space", help="spatial convergence study with manufactured data")
    s.add_argument("--levels", type=int, default=4)
    s.add_argument("--output", default="convergence_space.csv")

    s = sub.add_parser("convergence-time", help="temporal convergence study on a fixed mesh")
    s.add_argument("--tau0", type=float, default=0.5)
    s.add_argument("--halvings", type=int, default=5)
    s.add_argument("--mesh-level", type=int, default=3)
    s.add_argument("--output", default="convergence_time.csv")

    for name, text in (("fracture", "fluid injection into a fractured heterogeneous slab"),
                       ("channel", "pressure-driven channel filtration with mesh motion"),
                       ("run", "generic run from a JSON config")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=(name == "run"))
        s.add_argument("--output-dir", default=None)
        s.add_argument("--steps", type=int, default=None, help="stop after this many steps")
    return p


def _print_report(report) -> None:
    cols = report.columns
    print(" ".join(f"{c:>12}" for c in cols))
    for row in report.table():
        print(" ".join(f"{v:12.4e}" if isinstance(v, float) else f"{v:>12}" for v in row))


def _scenario(args) -> int:
    from .scenarios import BUILTIN, ScenarioConfig, run_scenario

    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(2, "config file not found", str(path))
        cfg = ScenarioConfig.from_json(path)
    else:
        cfg = ScenarioConfig.from_dict(BUILTIN[args.command](), base_dir=args.output_dir or ".")
    if args.steps is not None:
        cfg.max_steps = args.steps
    out = args.output_dir or cfg.output.directory or f"output_{cfg.name}"
    result = run_scenario(cfg, output_dir=out, progress=lambda n, st: log.info("step %d t=%g", n, st.t))
    print(f"{cfg.name}: {len(result.times) - 1} steps, t = {result.state.t:g}, "
          f"max interface residual {max(result.interface_residual, default=0.0):.2e}")
    for f in result.files:
        print(f"wrote {f}")
    return 0


def run(args) -> int:
    from . import mms

    if args.command == "convergence-space":
        if not 1 <= args.levels <= 5:
            raise UsageError("--levels must be between 1 and 5")
        report = mms.spatial_convergence_study(args.levels)
    elif args.command == "convergence-time":
        if args.halvings < 0 or args.tau0 <= 0 or args.mesh_level < 1:
            raise UsageError("--tau0 must be positive, --halvings nonnegative, --mesh-level at least 1")
        report = mms.temporal_convergence_study(args.mesh_level, args.tau0, args.halvings)
    else:
        return _scenario(args)
    write_csv(report, args.output)
    _print_report(report)
    print(f"wrote {args.output}")
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with _threads():
            return run(args)
    except UsageError as exc:
        print(f"fpsi: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"fpsi: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (FPSIError, OSError, json.JSONDecodeError) as exc:
        code = getattr(exc, "code", "ERROR")
        print(f"fpsi: {code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
