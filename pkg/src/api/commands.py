"""
Command handlers behind the CLI.

Each handler returns the process exit code; PlannerError subclasses raised
inside are turned into exit codes by main.py.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.api import scenarios
from src.api.bidding import (
    SWEEP_COLUMNS,
    BidResult,
    Scenario,
    balance_residual,
    format_synergy,
    run_scenario,
    standalone_capacities,
    sweep,
    synergy_factor,
)
from src.core.errors import EXIT_OK, EXIT_VIOLATION, PlannerError, ScenarioError, SimulationViolationError
from src.utils.console_helpers import print_header, print_info, print_success, print_warning
from src.core.settings import OUTPUT_DIR, WORKERS
from src.models.policy import validate
from src.schemas.schemas import BidResultDocument, SimulationSummary
from src.utils.document_helpers import (
    freezer_specs,
    load_result_document,
    load_scenario_file,
    result_document,
    result_of,
    scenario_of,
)
from src.utils.file_helpers import PathLike, ensure_dir, read_table, write_json, write_table
from src.utils.simulation_helpers import (
    parse_signal_spec,
    regulation_frame,
    simulate_policies,
    write_trace_csv,
)

log = logging.getLogger(__name__)


# ==================== solve ====================

BALANCE_TOLERANCE = 1e-8


def result_problems(doc: BidResultDocument, base_dir: PathLike = ".") -> list[str]:
    """Structure and balance problems of a bid rebuilt from its result document."""
    scn, result = result_of(doc, base_dir)
    problems = [
        f"{label}: policy structure {violation}"
        for label, policy, structure in zip(result.labels, result.policies, scn.structures)
        for violation in validate(policy, structure, tol=1e-9)
    ]
    residual = balance_residual(result.policies, result.market)
    if residual > BALANCE_TOLERANCE:
        problems.append(f"balance residual {residual:.3e} kW exceeds {BALANCE_TOLERANCE:g} kW")
    return problems


def _print_result(scn: Scenario, result: BidResult, standalone: list[float], sigma: Optional[float]) -> None:
    for label, gamma_alone, policy in zip(result.labels, standalone, result.policies):
        print_info(f"{label}: γ = {policy.gamma_or_zero().min():.4f} kW in aggregate, "
                   f"{gamma_alone:.4f} kW standalone")
    if scn.objective == "max-capacity":
        print_success(f"Aggregate capacity γ_agg = {result.objective_value:.4f} kW")
        print_info(f"Synergy factor σ = {format_synergy(sigma)}")
    else:
        print_success(f"Expected profit = {result.objective_value:.4f}")
        print_info(f"Aggregate capacity min γ_agg = {result.gamma_agg_max:.4f} kW")
    stats = result.stats
    print_info(f"LP: {stats['variables']} variables, {stats['rows']} rows, {stats['seconds']} s ({stats['backend']})")


def run_solve(path: str, out_dir: Optional[str] = None) -> int:
    """Solve a scenario file and write `<name>.result.json`."""
    doc = load_scenario_file(path)
    print_header(f"Solving {doc.name}")
    scn = scenario_of(doc, Path(path).parent)
    result = run_scenario(scn)
    standalone = standalone_capacities(scn)
    sigma = synergy_factor(result.gamma_agg_max, standalone) if scn.objective == "max-capacity" else None
    _print_result(scn, result, standalone, sigma)

    out = ensure_dir(out_dir or doc.outputs.dir)
    document = result_document(result, doc, standalone, sigma)
    target = write_json(out / f"{doc.name}.result.json", document.model_dump(mode="json"))
    for problem in result_problems(load_result_document(target), Path(path).parent):
        print_warning(problem)
    print_success(f"Result written to {target}")
    return EXIT_OK


# ==================== simulate ====================

def run_simulate(result_path: str, signal: Optional[str] = None, seed: Optional[int] = None,
                 out_dir: Optional[str] = None) -> int:
    """Replay a solved bid under one activation signal; violations end with exit code 4."""
    doc = load_result_document(result_path)
    scn, result = result_of(doc, Path(result_path).parent)
    spec = signal or doc.scenario.signal
    if spec is None:
        raise ScenarioError("No activation signal: pass --signal or set the scenario's signal")
    activation = parse_signal_spec(spec, scn.grid, seed)
    print_header(f"Simulating {doc.scenario.name}")
    print_info(f"Signal {activation.source}, mean {activation.w.mean():+.4f}")

    trace = simulate_policies(result.policies, scn.resources, activation, scn.grid)
    out = ensure_dir(out_dir or doc.scenario.outputs.dir)
    stem = f"{doc.scenario.name}.sim"
    summary = SimulationSummary(result=str(result_path), signal=activation.source,
                                violations=[str(v) for v in trace.violations])
    if doc.scenario.outputs.trace:
        summary.trace_csv = str(write_trace_csv(out / f"{stem}.trace.csv", trace, freezer_specs(doc.scenario)))
        summary.regulation_csv = str(write_table(out / f"{stem}.regulation.csv", regulation_frame(trace, scn.grid)))
    write_json(out / f"{stem}.json", summary.model_dump(mode="json"))

    for rt in trace.resources:
        if rt.x is not None:
            print_info(f"{rt.label}: state {rt.x.min():.3f}..{rt.x.max():.3f} kWh")
        print_info(f"{rt.label}: regulation energy up {rt.e_up.sum():.3f} kWh, down {rt.e_dn.sum():.3f} kWh")
    if trace.violations:
        for v in trace.violations:
            print_warning(str(v))
        raise SimulationViolationError(f"{len(trace.violations)} constraint violation(s) under {activation.source}")
    print_success("No power, ramp or state violations")
    return EXIT_OK


# ==================== reproduce ====================

def _compare(table: pd.DataFrame, rows: Sequence[scenarios.TableRow]) -> pd.DataFrame:
    table = table.copy()
    table.insert(0, "count", [r.count for r in rows])
    table.insert(0, "battery", [r.battery for r in rows])
    table["published_gamma_agg_kW"] = [r.gamma_agg_kW for r in rows]
    table["published_sigma"] = [r.sigma for r in rows]
    table["dev_gamma_agg_pct"] = 100.0 * (table["gamma_agg_kW"] / table["published_gamma_agg_kW"] - 1.0)
    table["dev_sigma_pct"] = 100.0 * (table["sigma"] / table["published_sigma"] - 1.0)
    return table


def reproduce_table(case: str, workers: int = WORKERS) -> pd.DataFrame:
    if case == "battery-freezer":
        rows, base = scenarios.BATTERY_FREEZER_ROWS, scenarios.battery_freezer()
    elif case == "battery-turbine":
        rows, base = scenarios.BATTERY_TURBINE_ROWS, scenarios.battery_turbine()
    elif case == "sweep":
        base = scenarios.battery_freezer()
        points = [(p, x) for p in scenarios.SWEEP_P_BAR_KW for x in scenarios.SWEEP_X_BAR_KWH]
        return sweep(base, points, workers=workers)[SWEEP_COLUMNS]
    else:
        raise ScenarioError(f"Unknown case '{case}', expected one of {', '.join(scenarios.CASES)}")
    table = sweep(base, [(r.p_bar_kW, r.x_bar_kWh) for r in rows], workers=workers)
    return _compare(table[SWEEP_COLUMNS], rows)


def run_reproduce(case: str, tolerance_pct: float = 5.0, out_dir: Optional[str] = None,
                  workers: int = WORKERS, strict: bool = False) -> int:
    """Rebuild a table; with `strict`, a row outside `tolerance_pct` ends with exit code 4."""
    print_header(f"Reproducing {case}")
    table = reproduce_table(case, workers)
    out = ensure_dir(out_dir or OUTPUT_DIR)
    target = write_table(out / f"{case}.csv", table)
    with pd.option_context("display.width", 160, "display.max_columns", 20):
        print(table.to_string(index=False, float_format=lambda v: f"{v:.2f}"))
    worst = 0.0
    if "dev_gamma_agg_pct" in table:
        worst = float(np.nanmax(np.abs(table[["dev_gamma_agg_pct", "dev_sigma_pct"]].to_numpy())))
        if worst <= tolerance_pct:
            print_success(f"All rows within {tolerance_pct:g}% of the published values (worst {worst:.2f}%)")
        else:
            print_warning(f"Largest deviation {worst:.2f}% exceeds {tolerance_pct:g}%")
    print_success(f"Table written to {target}")
    if strict and worst > tolerance_pct:
        raise PlannerError(f"{case}: deviation {worst:.2f}% exceeds {tolerance_pct:g}%", exit_code=EXIT_VIOLATION)
    return EXIT_OK


# ==================== sweep ====================

def run_sweep(path: str, grid_csv: str, out_dir: Optional[str] = None, workers: int = WORKERS) -> int:
    """Sweep the first battery of a scenario over a (p_bar_kW, x_bar_kWh) grid."""
    doc = load_scenario_file(path)
    scn = scenario_of(doc, Path(path).parent)
    if scn.objective != "max-capacity":
        raise ScenarioError("Sweeps need a max-capacity scenario")
    index = next((j for j, phi in enumerate(scn.resources) if phi.kind == "battery"), 0)
    points_df = read_table(grid_csv, required=("p_bar_kW", "x_bar_kWh"))
    points = list(zip(points_df["p_bar_kW"].astype(float), points_df["x_bar_kWh"].astype(float)))
    print_header(f"Sweeping {scn.resources[index].label} of {doc.name} over {len(points)} points")
    table = sweep(scn, points, index=index, workers=workers)
    failed = table[table["status"] != "optimal"]
    for _, row in failed.iterrows():
        print_warning(f"p={row['p_bar_kW']:g} kW, x={row['x_bar_kWh']:g} kWh: {row['status']}")
    out = ensure_dir(out_dir or doc.outputs.dir)
    target = write_table(out / f"{doc.name}.sweep.csv", table[SWEEP_COLUMNS])
    print_success(f"{len(table) - len(failed)} of {len(table)} points solved, table written to {target}")
    return EXIT_OK
