"""
Time grid for FlexPlanner.

All market, system and control timescales are stored as integer seconds so that
divisibility checks and index arithmetic stay exact. Intervals are 1-based and
half-open: interval k of scale T covers [(k-1)T, kT).
"""

from itertools import combinations
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import GridError
from src.core.settings import SECONDS_PER_DAY

Timescale = Literal["H", "SFR", "DA", "ID", "S", "C"]

# Longest to shortest
TIMESCALES: tuple[str, ...] = ("H", "SFR", "DA", "ID", "S", "C")


class TimeGrid(BaseModel):
    """Every timescale of the bidding problem plus the market lead times."""
    model_config = ConfigDict(frozen=True)

    T_H: int = Field(gt=0, description="Planning horizon [s]")
    T_SFR: int = Field(gt=0, description="Reserve tendering period [s]")
    T_DA: int = Field(gt=0, description="Day-ahead market interval [s]")
    T_ID: int = Field(gt=0, description="Intra-day market interval [s]")
    T_S: int = Field(gt=0, description="System discretization [s]")
    T_C: int = Field(gt=0, description="Control / activation interval [s]")
    lead_DA: int = Field(0, ge=0, description="Day-ahead lead time [s]")
    lead_ID: int = Field(0, ge=0, description="Intra-day lead time [s]")

    @model_validator(mode="after")
    def check_chain(self):
        chain = [(name, self.duration(name)) for name in TIMESCALES]
        for (long_name, long_t), (short_name, short_t) in zip(chain, chain[1:]):
            if short_name == "C":
                if not long_t > short_t:
                    raise GridError(f"T_S={long_t} must be strictly longer than T_C={short_t}")
            elif long_t < short_t:
                raise GridError(f"T_{long_name}={long_t} must not be shorter than T_{short_name}={short_t}")
        for (long_name, long_t), (short_name, short_t) in combinations(chain, 2):
            if long_t % short_t:
                raise GridError(
                    f"T_{long_name}={long_t} is not an integer multiple of T_{short_name}={short_t}"
                )
        return self

    def duration(self, scale: str) -> int:
        if scale not in TIMESCALES:
            raise GridError(f"Unknown timescale '{scale}'")
        return getattr(self, f"T_{scale}")

    def count(self, scale: str) -> int:
        """N_* = T_H / T_*."""
        return self.T_H // self.duration(scale)

    @property
    def N_SFR(self) -> int:
        return self.count("SFR")

    @property
    def N_DA(self) -> int:
        return self.count("DA")

    @property
    def N_ID(self) -> int:
        return self.count("ID")

    @property
    def N_S(self) -> int:
        return self.count("S")

    @property
    def N_C(self) -> int:
        return self.count("C")

    @property
    def steps_per_system(self) -> int:
        """Control samples per system interval."""
        return self.T_S // self.T_C

    @property
    def days(self) -> int:
        return max(1, -(-self.T_H // SECONDS_PER_DAY))


def build_grid(durations: dict[str, int], leads: dict[str, int] | None = None) -> TimeGrid:
    """Build a validated TimeGrid from {'H': .., 'SFR': .., ...} and {'DA': .., 'ID': ..}.

    Omitted scales default to: SFR to the horizon, ID to the system interval, DA to ID.
    """
    leads = leads or {}
    for name, value in durations.items():
        if value is None or value <= 0:
            raise GridError(f"Duration T_{name} must be positive, got {value}")
    try:
        horizon = int(durations["H"])
        system = int(durations["S"])
        control = int(durations["C"])
    except KeyError as e:
        raise GridError(f"Missing duration T_{e.args[0]}")
    try:
        return TimeGrid(
            T_H=horizon,
            T_SFR=int(durations.get("SFR", horizon)),
            T_DA=int(durations.get("DA", durations.get("ID", system))),
            T_ID=int(durations.get("ID", system)),
            T_S=system,
            T_C=control,
            lead_DA=int(leads.get("DA", 0)),
            lead_ID=int(leads.get("ID", 0)),
        )
    except GridError:
        raise
    except ValueError as e:
        # pydantic wraps validator errors; surface the original message
        raise GridError(str(e))


def index_map(grid: TimeGrid, fine: str, coarse: str, k: int) -> int:
    """Return the coarse interval containing fine interval k: ceil(k * T_fine / T_coarse)."""
    fine_t = grid.duration(fine)
    coarse_t = grid.duration(coarse)
    if fine_t > coarse_t:
        raise GridError(f"T_{fine}={fine_t} is longer than T_{coarse}={coarse_t}")
    if not 1 <= k <= grid.count(fine):
        raise GridError(f"Index {k} out of range 1..{grid.count(fine)} for timescale {fine}")
    return -(-k * fine_t // coarse_t)


def interval_bounds(grid: TimeGrid, scale: str, k: int) -> tuple[int, int]:
    """Half-open interval [(k-1)T, kT) of scale `scale` in seconds."""
    if not 1 <= k <= grid.count(scale):
        raise GridError(f"Index {k} out of range 1..{grid.count(scale)} for timescale {scale}")
    t = grid.duration(scale)
    return (k - 1) * t, k * t


def interval_of(grid: TimeGrid, scale: str, t: float) -> int:
    """1-based interval of `scale` containing time t; t = T_H maps to the last interval."""
    if not 0 <= t <= grid.T_H:
        raise GridError(f"Time {t} outside [0, {grid.T_H}]")
    return min(int(t // grid.duration(scale)) + 1, grid.count(scale))


def breakpoint_times(grid: TimeGrid) -> list[int]:
    """Times of the power-reference breakpoints p_0..p_N_S."""
    return [k * grid.T_S for k in range(grid.N_S + 1)]
