"""
Command line entry point.

    sbscv run <scenario.json> [--out DIR] [--seed N]
    sbscv verify [--suite fast|all]
    sbscv bounds <scenario.json> --only NAME

Exit status: 0 when every bound holds, 1 when one is violated, 2 on
configuration, input or resource errors.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from sbscv_lab.config.scenario import load_scenario
from sbscv_lab.runner.experiment import BOUND_NAMES, RunRecord, run
from sbscv_lab.runner.record_formatter import RecordFormatter
from sbscv_lab.runner.verification import SUITES, verify
from sbscv_lab.utils.errors import SbscvError
from sbscv_lab.utils.logger import LogManager

EXIT_OK, EXIT_VIOLATED, EXIT_ERROR = 0, 1, 2
DEFAULT_OUT = Path("sbscv_out")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cap", type=int, default=None,
                        help="Largest joint Hilbert-space dimension (overrides SBSCV_CAP and the scenario).")
    common.add_argument("--verbose", "-v", action="store_true", help="Mirror log output to stderr.")

    parser = argparse.ArgumentParser(prog="sbscv", description="Numerical checks of SBS convergence bounds.")
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", parents=[common], help="Run a scenario and write CSV and manifest files.")
    run_cmd.add_argument("scenario", type=Path)
    run_cmd.add_argument("--out", type=Path, default=None,
                         help=f"Output directory (default {DEFAULT_OUT}/<scenario name>).")
    run_cmd.add_argument("--seed", type=int, default=None)

    verify_cmd = commands.add_parser("verify", parents=[common], help="Run the built-in verification checks.")
    verify_cmd.add_argument("--suite", choices=SUITES, default="fast")
    verify_cmd.add_argument("--seed", type=int, default=0)

    bounds_cmd = commands.add_parser("bounds", parents=[common], help="Print one bound over a scenario's times.")
    bounds_cmd.add_argument("scenario", type=Path)
    bounds_cmd.add_argument("--only", required=True, choices=BOUND_NAMES)
    return parser


def _print_failures(record: RunRecord):
    for t, report in record.failures:
        print(f"VIOLATED t={t:g} {report.name}: lhs {report.lhs:.6e} rhs {report.rhs:.6e} {report.context}",
              file=sys.stderr)


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario, args.cap)
    out_dir = args.out if args.out is not None else DEFAULT_OUT / scenario.name
    record = run(scenario, out_dir, seed=args.seed, cap=args.cap)
    print(RecordFormatter(record).format_summary().to_string(index=False))
    print(f"wrote {out_dir}/bounds.csv, summary.csv, manifest.json")
    _print_failures(record)
    return EXIT_OK if record.all_satisfied else EXIT_VIOLATED


def _cmd_bounds(args) -> int:
    scenario = load_scenario(args.scenario, args.cap)
    record = run(scenario, cap=args.cap, only=args.only)
    frame = RecordFormatter(record).format_bounds()
    print(frame[['t', 'name', 'lhs', 'rhs', 'margin', 'satisfied']].to_string(index=False))
    _print_failures(record)
    return EXIT_OK if record.all_satisfied else EXIT_VIOLATED


def _cmd_verify(args) -> int:
    result = verify(args.suite, args.seed)
    for line in result.lines():
        print(line)
    for failure in result.failures:
        print(f"FAILED {failure}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VIOLATED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        LogManager().enable_console("INFO")
    handlers = {'run': _cmd_run, 'bounds': _cmd_bounds, 'verify': _cmd_verify}
    try:
        return handlers[args.command](args)
    except SbscvError as e:
        LogManager().get_logger("Cli").error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
