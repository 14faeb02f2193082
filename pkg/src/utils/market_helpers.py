"""
Energy-market coupling helpers.

Power-to-energy maps, lead-time masks of the day-ahead and intra-day trading
policies, the balance equalities between resources and markets, and the
linear expected-profit objective.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.core.errors import ScenarioError
from src.core.lpcore import FREE, RobustRowSet, VarRef, eq
from src.core.settings import SECONDS_PER_DAY, SECONDS_PER_HOUR
from src.models.policy import AffinePolicy, PolicyStructure
from src.models.timegrid import TimeGrid
from src.utils.file_helpers import PathLike, read_table
from src.utils.robust_helpers import PolicyVars

log = logging.getLogger(__name__)

PRICE_COLUMNS = ("c_DA", "c_ID", "c_SFR", "c_up", "c_dn", "w_exp", "up_frac", "dn_frac")


# ==================== Price forecast ====================

def _series(values, n: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.size == 1:
        arr = np.full(n, float(arr[0]))
    if arr.shape != (n,):
        raise ScenarioError(f"Price series {name} must have length {n}, got {arr.size}")
    if np.any(~np.isfinite(arr)):
        raise ScenarioError(f"Price series {name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class PriceForecast:
    """Expected prices and activation statistics entering the profit objective.

    c_DA, c_ID, c_up, c_dn in currency/kWh; c_SFR in currency/kW per system interval.
    """
    c_DA: np.ndarray
    c_ID: np.ndarray
    c_SFR: np.ndarray
    c_up: np.ndarray
    c_dn: np.ndarray
    expected_w: np.ndarray
    expected_up_frac: np.ndarray
    expected_dn_frac: np.ndarray

    @classmethod
    def build(cls, grid: TimeGrid, c_DA=0.0, c_ID=0.0, c_SFR=0.0, c_up=0.0, c_dn=0.0,
              expected_w=0.0, expected_up_frac=0.0, expected_dn_frac=0.0) -> "PriceForecast":
        """Scalars are broadcast to the length of their timescale."""
        forecast = cls(
            c_DA=_series(c_DA, grid.N_DA, "c_DA"),
            c_ID=_series(c_ID, grid.N_ID, "c_ID"),
            c_SFR=_series(c_SFR, grid.N_S, "c_SFR"),
            c_up=_series(c_up, grid.N_ID, "c_up"),
            c_dn=_series(c_dn, grid.N_ID, "c_dn"),
            expected_w=_series(expected_w, grid.N_S, "w_exp"),
            expected_up_frac=_series(expected_up_frac, grid.N_ID, "up_frac"),
            expected_dn_frac=_series(expected_dn_frac, grid.N_ID, "dn_frac"),
        )
        if np.any(np.abs(forecast.expected_w) > 1):
            raise ScenarioError("Expected activation must lie in [-1, 1]")
        fractions = (forecast.expected_up_frac, forecast.expected_dn_frac)
        if any(np.any((f < 0) | (f > 1)) for f in fractions):
            raise ScenarioError("Expected activation fractions must lie in [0, 1]")
        if np.any(forecast.expected_up_frac + forecast.expected_dn_frac > 1 + 1e-12):
            raise ScenarioError("Expected up and down fractions must sum to at most 1")
        return forecast


def zero_forecast(grid: TimeGrid) -> PriceForecast:
    return PriceForecast.build(grid)


def read_price_csv(path: PathLike, grid: TimeGrid) -> PriceForecast:
    """Forecast from a CSV with one column per series; shorter series leave trailing cells empty."""
    df = read_table(path)
    unknown = [c for c in df.columns if c not in PRICE_COLUMNS]
    if unknown:
        raise ScenarioError(f"{path}: unknown price column(s) {', '.join(unknown)}")
    values = {c: df[c].dropna().to_numpy(dtype=float) for c in df.columns}
    log.info("Loaded price forecast %s with columns %s", path, ", ".join(values))
    return PriceForecast.build(
        grid,
        c_DA=values.get("c_DA", 0.0),
        c_ID=values.get("c_ID", 0.0),
        c_SFR=values.get("c_SFR", 0.0),
        c_up=values.get("c_up", 0.0),
        c_dn=values.get("c_dn", 0.0),
        expected_w=values.get("w_exp", 0.0),
        expected_up_frac=values.get("up_frac", 0.0),
        expected_dn_frac=values.get("dn_frac", 0.0),
    )


# ==================== Energy maps ====================

def _energy_map(grid: TimeGrid, T_market: int) -> np.ndarray:
    steps = T_market // grid.T_S
    rows = grid.N_S // steps
    out = np.zeros((rows, grid.N_S + 1))
    for m in range(rows):
        k0 = m * steps
        out[m, k0:k0 + steps + 1] = grid.T_S
        out[m, k0] = out[m, k0 + steps] = grid.T_S / 2.0
    return out / SECONDS_PER_HOUR


def energy_maps(grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """(E_DA, E_ID): kWh per market interval from the N_S + 1 power breakpoints in kW."""
    return _energy_map(grid, grid.T_DA), _energy_map(grid, grid.T_ID)


# ==================== Lead-time masks ====================

def causality_mask(n: int) -> np.ndarray:
    """Q[k, n] may be nonzero only once w̃_n is complete: k >= n + 1."""
    k = np.arange(n + 1)[:, None]
    cols = np.arange(1, n + 1)[None, :]
    return k >= cols + 1


def lead_time_masks(grid: TimeGrid, structure: Optional[PolicyStructure] = None) -> tuple[np.ndarray, np.ndarray]:
    """Allowed entries of Q_DA and Q_ID as (N_S+1) x N_S boolean matrices.

    Q_DA[k, n] needs w̃_n before the day-ahead gate of the day holding breakpoint
    k, which closes lead_DA before that day starts. Q_ID[k, n] needs w̃_n lead_ID
    before breakpoint k. When `structure` is given the masks are further
    restricted to its band.
    """
    n = grid.N_S
    k = np.arange(n + 1)[:, None]
    cols = np.arange(1, n + 1)[None, :]
    t_k = k * grid.T_S
    day = np.maximum(np.ceil(t_k / SECONDS_PER_DAY) - 1, 0)
    gate_DA = day * SECONDS_PER_DAY - grid.lead_DA
    known = cols * grid.T_S
    base = causality_mask(n)
    if structure is not None:
        base = base & structure.mask
    mask_DA = base & (known <= gate_DA)
    mask_ID = base & (known <= t_k - grid.lead_ID)
    return mask_DA, mask_ID


# ==================== Market policies ====================

@dataclass(frozen=True, eq=False)
class MarketPolicies:
    """Day-ahead and intra-day trading policies; neither carries a γ."""
    da: AffinePolicy
    id: AffinePolicy

    @property
    def reference(self) -> AffinePolicy:
        """Aggregate traded reference p_DA + p_ID."""
        return AffinePolicy(Q=self.da.Q + self.id.Q, q=self.da.q + self.id.q)


# ==================== Market columns ====================

@dataclass(frozen=True, eq=False)
class MarketVars:
    """Columns of one trading policy {Q, q}; Q exists only where `mask` allows it."""
    owner: str
    mask: np.ndarray
    q_fixed_zero: bool = False

    def Q(self, k: int, n: int) -> Optional[VarRef]:
        if not self.mask[k, n - 1]:
            return None
        return VarRef(self.owner, "Q", (k + 1, n))

    def q(self, k: int) -> VarRef:
        return VarRef(self.owner, "q", (k + 1,))

    def entries(self) -> list[tuple[int, int]]:
        return [(int(k), int(n) + 1) for k, n in np.argwhere(self.mask)]

    def declarations(self) -> dict[VarRef, tuple[float, float]]:
        decl = {VarRef(self.owner, "Q", (k + 1, n)): FREE for k, n in self.entries()}
        for k in range(self.mask.shape[0]):
            decl[self.q(k)] = (0.0, 0.0) if self.q_fixed_zero else FREE
        return decl


def market_vars(grid: TimeGrid, resources: Sequence[PolicyVars], frozen: bool) -> tuple[MarketVars, MarketVars]:
    """Day-ahead and intra-day columns.

    Q entries outside every resource mask would be forced to zero by the balance
    rows, so they are not created. Frozen markets keep only a free q_DA.
    """
    union = np.zeros((grid.N_S + 1, grid.N_S), dtype=bool)
    for pv in resources:
        union |= pv.structure.mask
    mask_DA, mask_ID = lead_time_masks(grid)
    if frozen:
        empty = np.zeros_like(union)
        return MarketVars("DA", empty), MarketVars("ID", empty, q_fixed_zero=True)
    return MarketVars("DA", mask_DA & union), MarketVars("ID", mask_ID & union)


def balance_rows(resources: Sequence[PolicyVars], da: MarketVars, id_: MarketVars) -> RobustRowSet:
    """ΣQ^(j) = Q_DA + Q_ID and Σq^(j) = q_DA + q_ID entrywise."""
    row_set = RobustRowSet(tag="balance")
    n = resources[0].structure.n if resources else da.mask.shape[1]
    entries: set[tuple[int, int]] = set()
    for pv in resources:
        entries.update(pv.structure.entries())
    entries.update(da.entries())
    entries.update(id_.entries())
    for k, col in sorted(entries):
        coeffs: dict[VarRef, float] = {}
        for pv in resources:
            var = pv.Q(k, col)
            if var is not None:
                coeffs[var] = 1.0
        for market in (da, id_):
            var = market.Q(k, col)
            if var is not None:
                coeffs[var] = -1.0
        row_set.add(eq(coeffs, 0.0))
    for k in range(n + 1):
        coeffs = {pv.q(k): 1.0 for pv in resources}
        coeffs[da.q(k)] = -1.0
        coeffs[id_.q(k)] = -1.0
        row_set.add(eq(coeffs, 0.0))
    return row_set


# ==================== Objective ====================

def _add(objective: dict[VarRef, float], var: Optional[VarRef], coef: float) -> None:
    if var is not None and coef:
        objective[var] = objective.get(var, 0.0) + coef


def expected_profit(
    prices: PriceForecast,
    grid: TimeGrid,
    resources: Sequence[PolicyVars],
    da: MarketVars,
    id_: MarketVars,
) -> dict[VarRef, float]:
    """Linear objective: reserve and regulation-energy revenue minus expected energy cost."""
    objective: dict[VarRef, float] = {}
    n = grid.N_S
    per_id = grid.T_ID // grid.T_S
    for pv in resources:
        for s in range(1, n + 1):
            _add(objective, pv.g(s), prices.c_SFR[s - 1])
        for m in range(grid.N_ID):
            # γ̄_m is the mean γ over the intra-day interval
            net = prices.c_up[m] * prices.expected_up_frac[m] - prices.c_dn[m] * prices.expected_dn_frac[m]
            weight = net * grid.T_ID / SECONDS_PER_HOUR / per_id
            for s in range(m * per_id + 1, (m + 1) * per_id + 1):
                _add(objective, pv.g(s), weight)

    E_DA, E_ID = energy_maps(grid)
    for market, E, c in ((da, E_DA, prices.c_DA), (id_, E_ID, prices.c_ID)):
        cost = c @ E  # currency per kW at each breakpoint
        for k in range(n + 1):
            if not market.q_fixed_zero:
                _add(objective, market.q(k), -cost[k])
        for k, col in market.entries():
            _add(objective, market.Q(k, col), -cost[k] * prices.expected_w[col - 1])
    return objective


def expected_energy(E: np.ndarray, Q: np.ndarray, q: np.ndarray, expected_w: np.ndarray) -> np.ndarray:
    """Energy per market interval of the policy {Q, q} at the expected activation."""
    return E @ (Q @ expected_w + q)

