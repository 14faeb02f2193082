#!/usr/bin/env python3
"""
FlexPlanner command line.

Usage:
    python3 main.py solve <scenario.json> [--out DIR]
    python3 main.py simulate <result.json> [--signal <spec|csv>] [--seed N]
    python3 main.py reproduce [battery-freezer|battery-turbine|sweep] [--tolerance PCT] [--strict]
    python3 main.py sweep <scenario.json> --grid <csv>
"""

import argparse
import logging
import sys

from src.api.commands import run_reproduce, run_simulate, run_solve, run_sweep
from src.api.scenarios import CASES
from src.core.errors import EXIT_VALIDATION, PlannerError, ScenarioError
from src.core.logger import configure_logging
from src.utils.console_helpers import print_error
from src.core.settings import TITLE, VERSION, WORKERS

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexplanner", description=f"{TITLE} {VERSION}")
    parser.add_argument("--log-level", default=None, help="Override FLEXPLANNER_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Solve command
    solve_parser = subparsers.add_parser("solve", help="Solve a scenario file")
    solve_parser.add_argument("scenario", help="Scenario JSON file")
    solve_parser.add_argument("--out", default=None, help="Output directory")

    # Simulate command
    simulate_parser = subparsers.add_parser("simulate", help="Replay a solved bid under an activation signal")
    simulate_parser.add_argument("result", help="Result JSON written by solve")
    simulate_parser.add_argument(
        "--signal",
        default=None,
        help="constant:<c>, square:<period_s>[:<amplitude>], walk:<step>[:<bias>] or a CSV file; "
        "defaults to the scenario's signal",
    )
    simulate_parser.add_argument("--seed", type=int, default=None, help="Seed of random-walk signals")
    simulate_parser.add_argument("--out", default=None, help="Output directory")

    # Reproduce command
    reproduce_parser = subparsers.add_parser("reproduce", help="Rebuild a published aggregation table")
    reproduce_parser.add_argument("case", choices=CASES, nargs="?", default="battery-freezer")
    reproduce_parser.add_argument("--tolerance", type=float, default=5.0, help="Accepted deviation in percent")
    reproduce_parser.add_argument("--strict", action="store_true", help="Exit with code 4 when a row is out of tolerance")
    reproduce_parser.add_argument("--out", default=None, help="Output directory")
    reproduce_parser.add_argument("--workers", type=int, default=WORKERS)

    # Sweep command
    sweep_parser = subparsers.add_parser("sweep", help="Sweep battery parameters of a scenario")
    sweep_parser.add_argument("scenario", help="Scenario JSON file")
    sweep_parser.add_argument("--grid", required=True, help="CSV with columns p_bar_kW, x_bar_kWh")
    sweep_parser.add_argument("--out", default=None, help="Output directory")
    sweep_parser.add_argument("--workers", type=int, default=WORKERS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION
    configure_logging(args.log_level)

    try:
        if args.command == "solve":
            return run_solve(args.scenario, args.out)
        elif args.command == "simulate":
            return run_simulate(args.result, args.signal, args.seed, args.out)
        elif args.command == "reproduce":
            return run_reproduce(args.case, args.tolerance, args.out, args.workers, args.strict)
        elif args.command == "sweep":
            return run_sweep(args.scenario, args.grid, args.out, args.workers)
    except PlannerError as e:
        print_error(e.detail)
        if isinstance(e, ScenarioError):
            for problem in e.problems:
                print_error(f"  {problem}")
        log.debug("Command %s failed", args.command, exc_info=True)
        return e.exit_code
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
