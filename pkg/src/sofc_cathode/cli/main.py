"""Argument parsing and exit-code mapping."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..core import CathodeError, ValidationError
from . import commands
from .config import load

HELP = {
    "run": "solve one operating point and write the nodal profiles",
    "sweep": "solve a (temperature, current) grid",
    "verify": "convergence study against the manufactured solution",
    "crosscheck": "solve, then recover the bulk O2 fraction from the layer thickness",
    "sensitivity": "active-layer thickness over a grid of O2 fractions",
    "compare": "model overpotentials next to a measured table",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sofc-cathode", description="Isothermal 1D SOFC cathode solver.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--out", type=str, help="output directory (overrides output.directory)")
        p.add_argument("--workers", type=int, help="parallel worker processes (overrides output.workers)")
        p.add_argument("--tol", type=float, help="convergence tolerance (overrides solver.tol)")
        p.add_argument("--nodes", type=int, help="number of nodes (overrides solver.nodes)")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        if name == "compare":
            p.add_argument("--measured", type=Path, help="measurement CSV (overrides compare.measured_csv)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load(args.config).with_overrides(tol=args.tol, nodes=args.nodes, workers=args.workers,
                                               out_dir=args.out)
        func = commands.COMMANDS[args.command]
        if args.command == "compare":
            result = func(cfg, args.measured)
        else:
            result = func(cfg)
    except ValidationError as exc:
        print("error: ValidationError", file=sys.stderr)
        for key, msg in exc.violations:
            print(f"  {key}: {msg}", file=sys.stderr)
        return commands.EXIT_VALIDATION
    except CathodeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return commands.EXIT_SOLVER

    for line in result.summary:
        print(line)
    for msg in result.failures:
        print(f"assertion failed: {msg}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
