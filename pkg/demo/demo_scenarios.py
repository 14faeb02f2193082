#!/usr/bin/env python3
"""
Demo Scenario Script for FlexPlanner

This script provides functionality to:
1. Write example scenario files (battery-freezer, battery-turbine, hourly profit)
2. Solve them and replay every bid under a random-walk activation signal
3. Remove the generated files

Usage:
    python3 demo_scenarios.py write [DIR]
    python3 demo_scenarios.py run [DIR] [--seed N]
    python3 demo_scenarios.py cleanup [DIR]
"""

import argparse
import os
import shutil
import sys
from pathlib import Path

import pandas as pd

# Add the project root directory to the path so we can import our modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from main import main as flexplanner  # noqa: E402
from src.core.errors import EXIT_OK  # noqa: E402
from src.utils.console_helpers import print_error, print_header, print_info, print_success, print_warning  # noqa: E402
from src.utils.document_helpers import parse_scenario  # noqa: E402
from src.utils.file_helpers import ensure_dir, write_json, write_table  # noqa: E402

DEFAULT_DIR = "demo/scenarios"

DAY_GRID = {"horizon_s": 86400, "sfr_s": 86400, "da_s": 3600, "id_s": 900, "system_s": 300, "control_s": 10,
            "lead_da_s": 43200, "lead_id_s": 3600}
HOUR_GRID = {"horizon_s": 3600, "system_s": 300, "control_s": 10, "lead_da_s": 0, "lead_id_s": 0}


def demo_documents(out_dir: Path) -> dict[str, dict]:
    outputs = {"dir": str(out_dir / "out")}
    return {
        "battery-freezer": {
            "name": "battery-freezer",
            "grid": DAY_GRID,
            "resources": [
                {"type": "battery", "label": "model_s", "p_max_kW": 17.2, "x_max_kWh": 100.0},
                {"type": "freezer", "label": "warehouse"},
            ],
            "outputs": outputs,
        },
        "battery-turbine": {
            "name": "battery-turbine",
            "grid": DAY_GRID,
            "resources": [
                {"type": "battery", "label": "model_s_x10", "p_max_kW": 172.0, "x_max_kWh": 1000.0},
                {"type": "turbine", "label": "turbine", "p_min_kW": 0.0, "p_max_kW": 250000.0,
                 "ramp_kW_per_min": 4500.0},
            ],
            "outputs": outputs,
        },
        "hourly-profit": {
            "name": "hourly-profit",
            "grid": HOUR_GRID,
            "resources": [{"type": "battery", "label": "battery", "p_max_kW": 10.0, "x_max_kWh": 10.0}],
            "structures": [{"bandwidth": 2}],
            "mode": {"market": "full-markets", "objective": "profit"},
            "prices": {"c_DA": [0.3] * 6 + [0.1] * 6, "c_ID": [0.3] * 6 + [0.1] * 6, "c_SFR": 0.05},
            "outputs": outputs,
        },
    }


def write_demo(out_dir: Path) -> list[Path]:
    print_header("Writing demo scenarios")
    ensure_dir(out_dir)
    paths = []
    for name, data in demo_documents(out_dir).items():
        parse_scenario(data)
        paths.append(write_json(out_dir / f"{name}.json", data))
        print_success(f"{name}.json")
    grid = pd.DataFrame({"p_bar_kW": [14.0, 17.2, 50.0], "x_bar_kWh": [27.0, 100.0, 210.0]})
    write_table(out_dir / "battery-grid.csv", grid, float_format="%g")
    print_success("battery-grid.csv")
    return paths


def run_demo(out_dir: Path, seed: int) -> int:
    paths = write_demo(out_dir)
    failures = 0
    for path in paths:
        code = flexplanner(["solve", str(path)])
        if code != EXIT_OK:
            print_warning(f"solve {path.name} exited with {code}")
            failures += 1
            continue
        result = out_dir / "out" / f"{path.stem}.result.json"
        code = flexplanner(["simulate", str(result), "--signal", "walk:0.05", "--seed", str(seed)])
        if code != EXIT_OK:
            print_warning(f"simulate {result.name} exited with {code}")
            failures += 1
    code = flexplanner(["sweep", str(out_dir / "battery-freezer.json"), "--grid", str(out_dir / "battery-grid.csv")])
    failures += code != EXIT_OK

    print_header("Demo Complete")
    if failures:
        print_error(f"{failures} step(s) failed")
        return 1
    print_info(f"Results in {out_dir / 'out'}")
    return 0


def cleanup_demo(out_dir: Path):
    if out_dir.is_dir():
        shutil.rmtree(out_dir)
        print_success(f"Removed {out_dir}")
    else:
        print_info(f"Nothing to remove at {out_dir}")


def main():
    parser = argparse.ArgumentParser(description="FlexPlanner Demo Scenarios")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Write command
    write_parser = subparsers.add_parser("write", help="Write demo scenario files")
    write_parser.add_argument("dir", nargs="?", default=DEFAULT_DIR)

    # Run command
    run_parser = subparsers.add_parser("run", help="Write, solve and simulate the demo scenarios")
    run_parser.add_argument("dir", nargs="?", default=DEFAULT_DIR)
    run_parser.add_argument("--seed", type=int, default=1)

    # Cleanup command
    cleanup_parser = subparsers.add_parser("cleanup", help="Remove generated demo files")
    cleanup_parser.add_argument("dir", nargs="?", default=DEFAULT_DIR)

    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        return 0

    out_dir = Path(args.dir)
    if args.command == "write":
        write_demo(out_dir)
    elif args.command == "run":
        return run_demo(out_dir, args.seed)
    elif args.command == "cleanup":
        cleanup_demo(out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
