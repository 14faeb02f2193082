"""
Bidding problems over an aggregation of resources.

`solve_bidding` maximises expected profit with full access to the day-ahead and
intra-day markets. `max_capacity` freezes the markets and maximises the
aggregate time-invariant reserve capacity. Both share one LP assembly.
"""

import logging
import multiprocessing
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.errors import InfeasibleError, ScenarioError
from src.core.lpcore import FREE, LinearProgram, LpSolution, RobustRowSet, VarRef, assemble, le, solve
from src.core.settings import LP_BACKEND, WORKERS
from src.models.policy import AffinePolicy, PolicyStructure
from src.models.resource import ResourceParams, make_battery, standalone_capacity
from src.models.timegrid import TimeGrid
from src.utils.market_helpers import (
    MarketPolicies,
    MarketVars,
    PriceForecast,
    balance_rows,
    expected_profit,
    market_vars,
    zero_forecast,
)
from src.utils.robust_helpers import PolicyVars, resource_rows

log = logging.getLogger(__name__)

MarketMode = Literal["full-markets", "markets-frozen"]
ObjectiveMode = Literal["profit", "max-capacity"]

FAMILIES = ("power", "ramp", "state")
DIAGNOSIS_ORDER = ("power", "ramp", "state", "delay")
Z = VarRef("agg", "z", ())


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: TimeGrid
    resources: list[ResourceParams]
    structures: list[PolicyStructure]
    market_mode: MarketMode = "markets-frozen"
    objective: ObjectiveMode = "max-capacity"
    prices: Optional[PriceForecast] = None
    name: str = "scenario"

    def __post_init__(self):
        if not self.resources:
            raise ScenarioError("A scenario needs at least one resource")
        if len(self.resources) != len(self.structures):
            raise ScenarioError(f"{len(self.resources)} resources but {len(self.structures)} policy structures")
        for phi, structure in zip(self.resources, self.structures):
            if phi.n != self.grid.N_S or structure.n != self.grid.N_S:
                raise ScenarioError(f"Resource '{phi.label}' does not match N_S = {self.grid.N_S}")
        labels = [phi.label for phi in self.resources]
        if len(set(labels)) != len(labels):
            raise ScenarioError(f"Resource labels must be unique, got {labels}")
        if self.market_mode not in ("full-markets", "markets-frozen"):
            raise ScenarioError(f"Unknown market mode '{self.market_mode}'")
        if self.objective not in ("profit", "max-capacity"):
            raise ScenarioError(f"Unknown objective '{self.objective}'")
        if self.market_mode == "markets-frozen" and self.objective == "profit":
            raise ScenarioError("Mode conflict: the profit objective needs full-markets mode")
        if self.objective == "profit" and self.prices is None:
            raise ScenarioError("The profit objective needs a price forecast")

    @property
    def labels(self) -> list[str]:
        return [phi.label for phi in self.resources]


@dataclass
class BidResult:
    scenario: str
    labels: list[str]
    policies: list[AffinePolicy]
    market: MarketPolicies
    gamma_agg: np.ndarray
    objective_value: float
    stats: dict = field(default_factory=dict)

    @property
    def gamma_agg_max(self) -> float:
        """Smallest aggregate capacity over the horizon."""
        return float(np.min(self.gamma_agg))


# ==================== LP assembly ====================

def _policy_vars(scn: Scenario, relax_delay: bool = False) -> list[PolicyVars]:
    pvs = []
    for j, (phi, structure) in enumerate(zip(scn.resources, scn.structures)):
        blocked = phi.blocks_regulation(scn.grid)
        if relax_delay:
            structure = replace(structure, delay_steps=0)
            blocked = False
        pvs.append(PolicyVars(owner=str(j), structure=structure, gamma_fixed_zero=blocked))
    return pvs


def _capacity_rows(pvs: Sequence[PolicyVars], n: int) -> RobustRowSet:
    """z <= Σ_j γ_k^(j) for every interval k."""
    row_set = RobustRowSet(tag="capacity")
    row_set.declare(Z, FREE)
    seen: set[frozenset] = set()
    for k in range(1, n + 1):
        coeffs = {Z: 1.0}
        for pv in pvs:
            g = pv.g(k)
            if g is not None:
                coeffs[g] = coeffs.get(g, 0.0) - 1.0
        key = frozenset(coeffs.items())
        # Time-invariant γ makes every interval's row identical
        if key in seen:
            continue
        seen.add(key)
        row_set.add(le(coeffs, 0.0))
    return row_set


def build_lp(scn: Scenario, relax: Optional[str] = None) -> tuple[LinearProgram, list[PolicyVars], MarketVars, MarketVars]:
    """Assemble the scenario's LP; `relax` drops one family ("power", "ramp", "state" or "delay")."""
    grid = scn.grid
    pvs = _policy_vars(scn, relax_delay=relax == "delay")
    families = tuple(f for f in FAMILIES if f != relax)
    parts: list[RobustRowSet] = []
    declared: dict = {}
    for phi, pv in zip(scn.resources, pvs):
        parts.extend(resource_rows(phi, pv, grid, families))
        declared.update(pv.declarations())
    frozen = scn.market_mode == "markets-frozen"
    da, id_ = market_vars(grid, pvs, frozen)
    declared.update(da.declarations())
    declared.update(id_.declarations())
    if scn.objective == "max-capacity":
        parts.append(_capacity_rows(pvs, grid.N_S))
        objective = {Z: 1.0}
    else:
        objective = expected_profit(scn.prices, grid, pvs, da, id_)
    lp = assemble(parts, balance_rows(pvs, da, id_), objective=objective, sense="max", variables=declared)
    return lp, pvs, da, id_


# ==================== Result extraction ====================

def _resource_policy(sol: LpSolution, pv: PolicyVars) -> AffinePolicy:
    n = pv.structure.n
    Q = np.zeros((n + 1, n))
    for k, col in pv.structure.entries():
        Q[k, col - 1] = sol.value(pv.Q(k, col))
    q = np.array([sol.value(pv.q(k)) for k in range(n + 1)])
    gamma = np.array([sol.value(pv.g(k)) if pv.g(k) is not None else 0.0 for k in range(1, n + 1)])
    return AffinePolicy(Q=Q, q=q, gamma=np.maximum(gamma, 0.0))


def _market_policy(sol: LpSolution, mv: MarketVars) -> AffinePolicy:
    n = mv.mask.shape[1]
    Q = np.zeros((n + 1, n))
    for k, col in mv.entries():
        Q[k, col - 1] = sol.value(mv.Q(k, col))
    q = np.array([sol.value(mv.q(k)) for k in range(n + 1)])
    return AffinePolicy(Q=Q, q=q)


def balance_residual(policies: Sequence[AffinePolicy], market: MarketPolicies) -> float:
    """Max-norm residual of ΣQ = Q_DA + Q_ID and Σq = q_DA + q_ID."""
    Q = sum(p.Q for p in policies) - market.da.Q - market.id.Q
    q = sum(p.q for p in policies) - market.da.q - market.id.q
    return float(max(np.max(np.abs(Q)), np.max(np.abs(q))))


def _close_balance(policies: list[AffinePolicy], pvs: Sequence[PolicyVars], da: MarketVars, id_: MarketVars,
                   market: MarketPolicies) -> tuple[list[AffinePolicy], MarketPolicies]:
    """Move the solver's balance round-off onto one allowed column so the equalities hold exactly."""
    Q_res = sum(p.Q for p in policies) - market.da.Q - market.id.Q
    q_res = sum(p.q for p in policies) - market.da.q - market.id.q
    Q_da, Q_id = market.da.Q.copy(), market.id.Q.copy()
    Qs = [p.Q.copy() for p in policies]
    for k, col in np.argwhere(Q_res != 0):
        r = Q_res[k, col]
        if da.mask[k, col]:
            Q_da[k, col] += r
        elif id_.mask[k, col]:
            Q_id[k, col] += r
        else:
            j = next(j for j in reversed(range(len(pvs))) if pvs[j].structure.mask[k, col])
            Qs[j][k, col] -= r
    fixed = [AffinePolicy(Q=Q, q=p.q, gamma=p.gamma) for Q, p in zip(Qs, policies)]
    closed = MarketPolicies(
        da=AffinePolicy(Q=Q_da, q=market.da.q + q_res),
        id=AffinePolicy(Q=Q_id, q=market.id.q),
    )
    return fixed, closed


# ==================== Solving ====================

def diagnose_infeasibility(scn: Scenario, backend: str = LP_BACKEND) -> Optional[str]:
    """First constraint family whose removal restores feasibility, or None."""
    for family in DIAGNOSIS_ORDER:
        lp, *_ = build_lp(scn, relax=family)
        sol = solve(lp, backend=backend)
        log.info("Relaxing %s: %s", family, sol.status)
        if sol.status in ("optimal", "unbounded"):
            return family
    return None


def _solve(scn: Scenario, backend: str) -> BidResult:
    lp, pvs, da, id_ = build_lp(scn)
    sol = solve(lp, backend=backend)
    if sol.status == "infeasible":
        family = diagnose_infeasibility(scn, backend)
        hint = f"; relaxing the {family} constraints restores feasibility" if family else ""
        raise InfeasibleError(f"Scenario '{scn.name}' is infeasible{hint}", family=family)
    if sol.status == "unbounded":
        raise InfeasibleError(
            f"Scenario '{scn.name}' is unbounded; a free market column probably lacks a price", status="unbounded"
        )
    if not sol.ok:
        raise InfeasibleError(f"Scenario '{scn.name}': solver stopped with {sol.status} ({sol.message})",
                              status=sol.status)

    policies = [_resource_policy(sol, pv) for pv in pvs]
    market = MarketPolicies(da=_market_policy(sol, da), id=_market_policy(sol, id_))
    raw_residual = balance_residual(policies, market)
    policies, market = _close_balance(policies, pvs, da, id_, market)
    gamma_agg = np.sum([p.gamma for p in policies], axis=0)
    # Capacity runs without a forecast are valued at zero prices
    prices = scn.prices if scn.prices is not None else zero_forecast(scn.grid)
    value = expected_profit(prices, scn.grid, pvs, da, id_)
    stats = {
        "status": sol.status,
        "backend": sol.backend,
        "seconds": round(sol.seconds, 4),
        "iterations": sol.iterations,
        "variables": lp.n_vars,
        "rows": len(lp.rows),
        "nonzeros": lp.nnz,
        "solver_balance_residual": raw_residual,
        "balance_residual": balance_residual(policies, market),
        "expected_profit": float(sum(coef * sol.value(var) for var, coef in value.items())),
    }
    return BidResult(
        scenario=scn.name,
        labels=scn.labels,
        policies=policies,
        market=market,
        gamma_agg=gamma_agg,
        objective_value=sol.objective_value,
        stats=stats,
    )


def solve_bidding(scn: Scenario, backend: str = LP_BACKEND) -> BidResult:
    """Expected-profit bid with day-ahead and intra-day trading."""
    if scn.market_mode != "full-markets" or scn.objective != "profit":
        raise ScenarioError("solve_bidding needs full-markets mode with the profit objective")
    return _solve(scn, backend)


def max_capacity(scn: Scenario, backend: str = LP_BACKEND) -> BidResult:
    """Largest aggregate capacity min_k Σ_j γ_k^(j) with frozen markets."""
    if scn.market_mode != "markets-frozen" or scn.objective != "max-capacity":
        raise ScenarioError("max_capacity needs markets-frozen mode with the max-capacity objective")
    result = _solve(scn, backend)
    log.info("Scenario '%s': aggregate capacity %.4f kW", scn.name, result.objective_value)
    return result


def run_scenario(scn: Scenario, backend: str = LP_BACKEND) -> BidResult:
    if scn.objective == "profit":
        return solve_bidding(scn, backend)
    return max_capacity(scn, backend)


# ==================== Synergy ====================

def synergy_factor(gamma_agg_max: float, standalone: Sequence[float]) -> Optional[float]:
    """σ = γ_agg / Σ γ_standalone − 1; None when every standalone capacity is zero."""
    total = float(sum(standalone))
    if total <= 0:
        return None
    sigma = gamma_agg_max / total - 1.0
    if sigma < -1e-6:
        log.warning("Negative synergy factor %.6f: aggregate %.6f below standalone sum %.6f",
                    sigma, gamma_agg_max, total)
    return sigma


def format_synergy(sigma: Optional[float]) -> str:
    return "undefined (infinite synergy)" if sigma is None else f"{sigma:.2f}"


def standalone_capacities(scn: Scenario) -> list[float]:
    return [standalone_capacity(phi, scn.grid) for phi in scn.resources]


# ==================== Sweep ====================

SWEEP_COLUMNS = ["p_bar_kW", "x_bar_kWh", "gamma_B_kW", "gamma_agg_kW", "sigma"]


def with_battery(base: Scenario, p_bar: float, x_bar: float, index: int = 0) -> Scenario:
    """Copy of `base` whose resource `index` is a battery (p̄, x̄) starting half full."""
    old = base.resources[index]
    battery = make_battery(p_bar, x_bar, x_bar / 2.0, base.grid, label=old.label)
    resources = list(base.resources)
    resources[index] = battery
    return replace(base, resources=resources, name=f"{base.name}[p={p_bar:g},x={x_bar:g}]")


def _sweep_point(args) -> dict:
    base, p_bar, x_bar, index, backend = args
    row = {"p_bar_kW": p_bar, "x_bar_kWh": x_bar}
    try:
        scn = with_battery(base, p_bar, x_bar, index)
        standalone = standalone_capacities(scn)
        result = max_capacity(scn, backend)
        sigma = synergy_factor(result.objective_value, standalone)
        row.update(gamma_B_kW=standalone[index], gamma_agg_kW=result.objective_value,
                   sigma=np.nan if sigma is None else sigma, status="optimal")
    except Exception as e:  # one failed point must not stop the sweep
        log.warning("Sweep point p=%g x=%g failed: %s", p_bar, x_bar, e)
        row.update(gamma_B_kW=np.nan, gamma_agg_kW=np.nan, sigma=np.nan, status=str(e))
    return row


def sweep(base: Scenario, points: Sequence[tuple[float, float]], index: int = 0,
          workers: int = WORKERS, backend: str = LP_BACKEND) -> pd.DataFrame:
    """One max_capacity solve per (p̄, x̄) point; rows follow the input order."""
    if not points:
        raise ScenarioError("Sweep grid is empty")
    if base.resources[index].kind != "battery":
        log.warning("Sweep replaces resource '%s' (%s) with a battery", base.resources[index].label,
                    base.resources[index].kind)
    cases = [(base, float(p), float(x), index, backend) for p, x in points]
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            rows = pool.map(_sweep_point, cases)
    else:
        rows = [_sweep_point(c) for c in cases]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS + ["status"])
