"""Command-line front end: ``hjverse run|list|validate``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .scenario import ScenarioError, apply_overrides, bundled_names, read_tree, validate_tree

OUT_DIR_ENV = "HJVERSE_OUT_DIR"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ABORT = 3


def list_scenarios() -> list[str]:
    return bundled_names()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjverse", description="Run wave, trajectory and branching scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or bundled scenario name")
    run.add_argument("config")
    run.add_argument("--out-dir", type=Path, default=None,
                     help=f"results directory (default: ${OUT_DIR_ENV}/<name> or ./results/<name>)")
    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("config")
    for sp in (run, val):
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted key, e.g. run.dt=0.005 (repeatable)")
    sub.add_parser("list", help="print bundled scenario names")
    return p


def _load(config, overrides):
    from .runner import build
    tree, origin = read_tree(config)
    sc = validate_tree(apply_overrides(tree, overrides))
    build(sc)
    return sc, origin


def resolve_out_dir(arg: Path | None, name: str) -> Path:
    if arg is not None:
        return arg
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) / name if env else Path("results") / name


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for name in list_scenarios():
            print(name)
        return EXIT_OK
    try:
        sc, origin = _load(args.config, args.override)
    except ScenarioError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "validate":
        print(f"{sc.name}: ok")
        return EXIT_OK

    from .runner import run_scenario
    out = resolve_out_dir(args.out_dir, sc.name)
    try:
        run_scenario(sc, out, origin, args.override)
    except ScenarioError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        # FloatingPointError and NumericalAbort are ArithmeticErrors
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"numerical abort: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ABORT
    print(str(out))
    return EXIT_OK


if __name__ == "__main__":
    logging.basicConfig(level=logging.WARNING)
    sys.exit(main())
