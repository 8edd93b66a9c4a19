"""
Command-line entry point: `qnmgain <mode> --scenario FILE --out DIR`.
"""
import argparse
import logging
import sys
import warnings
from pathlib import Path

from .core.cli_io import run
from .core.exceptions import (
    CalibrationError, EmitterIndexError, GainPresentError, MissingDetectorError,
    PhysicsRegimeError, QnmGainError, ScenarioError, SymmetryError,
)
from .core.scenario import MODES, load_scenario, preset_path, with_mode

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_PHYSICS = 3

VALIDATION_ERRORS = (ScenarioError, EmitterIndexError, SymmetryError, GainPresentError,
                     CalibrationError, MissingDetectorError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnmgain",
        description="Gain-modified two-emitter master equations from a single quasinormal mode")
    commands = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        command = commands.add_parser(mode, help=f"run a scenario in {mode} mode")
        command.add_argument("--scenario", required=True,
                             help="scenario JSON file, or the name of a shipped preset")
        command.add_argument("--out", default=".", help="output directory")
        strictness = command.add_mutually_exclusive_group()
        strictness.add_argument("--strict", dest="strict", action="store_true", default=True,
                                help="reject unknown scenario keys (default)")
        strictness.add_argument("--lenient", dest="strict", action="store_false",
                                help="log and drop unknown scenario keys")
        command.add_argument("--workers", type=int, default=None,
                             help="sweep worker processes (default: physical cores)")
        command.add_argument("--debug", action="store_true", help="log progress")
        if mode == "compare":
            command.add_argument("--table", default=None,
                                 help="rate table to compare, overriding run.compare_table")
    return parser


def _configure_logging(debug):
    logging.basicConfig(level=logging.DEBUG if debug else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    warnings.simplefilter("default")


def _scenario_path(value):
    path = Path(value)
    if path.suffix or path.exists():
        return path
    return preset_path(value)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.debug)
    try:
        scenario = load_scenario(_scenario_path(args.scenario), strict=args.strict)
        table = getattr(args, "table", None)
        scenario = with_mode(scenario, args.mode,
                             compare_table=Path(table).resolve() if table else None)
        written = run(scenario, args.out, debug=args.debug, workers=args.workers)
    except VALIDATION_ERRORS as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_VALIDATION
    except PhysicsRegimeError as error:
        print(f"physics regime error: {error}", file=sys.stderr)
        return EXIT_PHYSICS
    except QnmGainError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_FAILURE
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
