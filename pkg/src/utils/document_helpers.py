"""
Document helper functions for FlexPlanner.

Conversions between the JSON documents of src.schemas and the domain types:
scenario files to Scenario objects, solved bids to result documents and back.
"""

import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from src.api.bidding import BidResult, Scenario
from src.core.errors import ScenarioError
from src.models.policy import AffinePolicy, make_structure
from src.models.resource import FreezerSpec, ResourceParams, make_battery, make_freezer, make_generic, make_turbine
from src.models.timegrid import TimeGrid, build_grid
from src.schemas.schemas import (
    BatterySection,
    BidResultDocument,
    FreezerSection,
    GenericSection,
    GridSection,
    MarketDocument,
    PolicyDocument,
    ScenarioFile,
    StructureSection,
    TurbineSection,
    validation_problems,
)
from src.utils.file_helpers import PathLike, read_json
from src.utils.market_helpers import MarketPolicies, PriceForecast, read_price_csv

log = logging.getLogger(__name__)


# ==================== Scenario files ====================

def parse_scenario(data: dict) -> ScenarioFile:
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        problems = validation_problems(e)
        raise ScenarioError(f"Invalid scenario: {len(problems)} problem(s)", problems=problems)


def load_scenario_file(path: PathLike) -> ScenarioFile:
    return parse_scenario(read_json(path))


def grid_of(section: GridSection) -> TimeGrid:
    durations = {"H": section.horizon_s, "S": section.system_s, "C": section.control_s}
    for key, value in (("SFR", section.sfr_s), ("DA", section.da_s), ("ID", section.id_s)):
        if value is not None:
            durations[key] = value
    return build_grid(durations, {"DA": section.lead_da_s, "ID": section.lead_id_s})


def freezer_spec(section: FreezerSection) -> FreezerSpec:
    return FreezerSpec(
        p_min=section.p_min_kW,
        p_max=section.p_max_kW,
        r_min=section.r_min_kW_per_min / 60.0,
        r_max=section.r_max_kW_per_min / 60.0,
        x_bar=section.x_max_kWh,
        theta_in_min=section.theta_in_min_C,
        theta_in_max=section.theta_in_max_C,
        theta_out=section.theta_out_C,
        T_dis=section.discharge_s,
        fill=section.fill,
        delay=section.delay_s,
    )


def _limit(value, default: float):
    return default if value is None else value


def resource_of(section, grid: TimeGrid) -> ResourceParams:
    if isinstance(section, BatterySection):
        x0 = section.x_max_kWh / 2.0 if section.x0_kWh is None else section.x0_kWh
        return make_battery(section.p_max_kW, section.x_max_kWh, x0, grid, label=section.label)
    if isinstance(section, FreezerSection):
        return make_freezer(freezer_spec(section), grid, label=section.label)
    if isinstance(section, TurbineSection):
        return make_turbine(section.p_min_kW, section.p_max_kW, section.ramp_kW_per_min, grid, label=section.label)
    if isinstance(section, GenericSection):
        return make_generic(
            grid,
            p_min=section.p_min_kW,
            p_max=section.p_max_kW,
            r_min=_limit(section.r_min_kW_per_s, -math.inf),
            r_max=_limit(section.r_max_kW_per_s, math.inf),
            x_min=_limit(section.x_min_kWh, -math.inf),
            x_max=_limit(section.x_max_kWh, math.inf),
            x0_min=section.x0_min_kWh,
            x0_max=section.x0_max_kWh,
            a=section.a_per_s,
            b=section.b_kW_per_unit,
            c=section.c,
            u=section.u,
            delay=section.delay_s,
            label=section.label,
        )
    raise ScenarioError(f"Unsupported resource section {type(section).__name__}")


def prices_of(doc: ScenarioFile, grid: TimeGrid, base_dir: Path) -> Optional[PriceForecast]:
    section = doc.prices
    if section is None:
        return None
    if section.csv is not None:
        path = Path(section.csv)
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ScenarioError(f"Price file {path} not found", problems=[f"/prices/csv: file {path} does not exist"])
        return read_price_csv(path, grid)
    return PriceForecast.build(
        grid,
        c_DA=section.c_DA, c_ID=section.c_ID, c_SFR=section.c_SFR, c_up=section.c_up, c_dn=section.c_dn,
        expected_w=section.w_exp, expected_up_frac=section.up_frac, expected_dn_frac=section.dn_frac,
    )


def scenario_of(doc: ScenarioFile, base_dir: PathLike = ".") -> Scenario:
    grid = grid_of(doc.grid)
    resources = [resource_of(section, grid) for section in doc.resources]
    structures_doc = doc.structures or [StructureSection() for _ in resources]
    structures = [
        make_structure(grid, s.bandwidth, delay=phi.delay, time_invariant=s.time_invariant_gamma)
        for s, phi in zip(structures_doc, resources)
    ]
    return Scenario(
        grid=grid,
        resources=resources,
        structures=structures,
        market_mode=doc.mode.market,
        objective=doc.mode.objective,
        prices=prices_of(doc, grid, Path(base_dir)),
        name=doc.name,
    )


def freezer_specs(doc: ScenarioFile) -> dict[str, FreezerSpec]:
    return {s.label: freezer_spec(s) for s in doc.resources if isinstance(s, FreezerSection)}


# ==================== Result documents ====================

def policy_document(label: str, policy: AffinePolicy) -> PolicyDocument:
    return PolicyDocument(
        label=label,
        Q=policy.Q.tolist(),
        q=[float(v) for v in policy.q],
        gamma_kW=None if policy.gamma is None else [float(v) for v in policy.gamma],
    )


def policy_of(doc: PolicyDocument, n: int) -> AffinePolicy:
    if len(doc.q) != n + 1:
        raise ScenarioError(f"Policy '{doc.label}' has {len(doc.q)} breakpoints, grid needs {n + 1}")
    Q = np.asarray(doc.Q, dtype=float)
    if Q.shape != (n + 1, n):
        raise ScenarioError(f"Policy '{doc.label}' has Q of shape {Q.shape}, grid needs {(n + 1, n)}")
    gamma = None if doc.gamma_kW is None else np.asarray(doc.gamma_kW, dtype=float)
    return AffinePolicy(Q=Q, q=np.asarray(doc.q, dtype=float), gamma=gamma)


def result_document(result: BidResult, doc: ScenarioFile, standalone: list[float],
                    sigma: Optional[float]) -> BidResultDocument:
    return BidResultDocument(
        scenario=doc,
        policies=[policy_document(label, p) for label, p in zip(result.labels, result.policies)],
        market=MarketDocument(
            da=policy_document("DA", result.market.da),
            id=policy_document("ID", result.market.id),
        ),
        gamma_agg_kW=[float(v) for v in result.gamma_agg],
        objective_value=float(result.objective_value),
        standalone_kW=[float(v) for v in standalone],
        sigma=sigma,
        stats=result.stats,
    )


def load_result_document(path: PathLike) -> BidResultDocument:
    try:
        return BidResultDocument.model_validate(read_json(path))
    except ValidationError as e:
        problems = validation_problems(e)
        raise ScenarioError(f"Invalid result document {path}", problems=problems)


def result_of(doc: BidResultDocument, base_dir: PathLike = ".") -> tuple[Scenario, BidResult]:
    """Rebuild the scenario and the bid of a result document."""
    scn = scenario_of(doc.scenario, base_dir)
    n = scn.grid.N_S
    if len(doc.policies) != len(scn.resources):
        raise ScenarioError(f"Result has {len(doc.policies)} policies for {len(scn.resources)} resources")
    policies = [policy_of(p, n) for p in doc.policies]
    market = MarketPolicies(da=policy_of(doc.market.da, n), id=policy_of(doc.market.id, n))
    result = BidResult(
        scenario=doc.scenario.name,
        labels=[p.label for p in doc.policies],
        policies=policies,
        market=market,
        gamma_agg=np.asarray(doc.gamma_agg_kW, dtype=float),
        objective_value=doc.objective_value,
        stats=dict(doc.stats),
    )
    return scn, result
