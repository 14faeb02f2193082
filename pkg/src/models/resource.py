"""
Flexibility parameter sets of individual resources.

A ResourceParams instance is the set of power, ramp-rate and state limits plus
the buffer dynamics dx/dt = a*x + (b*u + c*p)/3600 of one resource, with x in
kWh, p and b*u in kW, a in 1/s and time in seconds. Disabled ramp or state
limits are stored as infinite bounds.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import ResourceError
from src.core.settings import DEFAULT_FREEZER_DELAY_S, SECONDS_PER_HOUR
from src.models.timegrid import TimeGrid


def _as_series(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ResourceError(f"{name} must have length {n}, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ResourceParams:
    """Flexibility parameter set of one resource over N_S system intervals."""
    p_min: np.ndarray
    p_max: np.ndarray
    r_min: np.ndarray
    r_max: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    x0_min: float
    x0_max: float
    a: float
    b: float
    c: float
    u: np.ndarray
    delay: float = 0.0
    label: str = "resource"
    kind: str = "generic"

    def __post_init__(self):
        n = len(np.atleast_1d(self.p_min))
        for name in ("p_min", "p_max", "r_min", "r_max", "x_min", "x_max", "u"):
            object.__setattr__(self, name, _as_series(getattr(self, name), n, name))
        if np.any(~np.isfinite(self.p_min)) or np.any(~np.isfinite(self.p_max)):
            raise ResourceError(f"{self.label}: power bounds must be finite")
        if np.any(self.p_min > self.p_max):
            raise ResourceError(f"{self.label}: p_min exceeds p_max")
        if np.any(self.r_min > self.r_max):
            raise ResourceError(f"{self.label}: r_min exceeds r_max")
        if np.any(self.x_min > self.x_max):
            raise ResourceError(f"{self.label}: x_min exceeds x_max")
        if self.a > 0:
            raise ResourceError(f"{self.label}: self-dissipation rate a must be <= 0, got {self.a}")
        if self.delay < 0:
            raise ResourceError(f"{self.label}: delay must be >= 0")
        if self.x0_min > self.x0_max:
            raise ResourceError(f"{self.label}: x0_min exceeds x0_max")
        if self.has_state and not (self.x_min[0] <= self.x0_min and self.x0_max <= self.x_max[0]):
            raise ResourceError(f"{self.label}: initial state range outside the first-interval state limits")

    @property
    def n(self) -> int:
        return len(self.p_min)

    @property
    def has_state(self) -> bool:
        return bool(np.any(np.isfinite(self.x_min)) or np.any(np.isfinite(self.x_max)))

    @property
    def has_ramp(self) -> bool:
        return bool(np.any(np.isfinite(self.r_min)) or np.any(np.isfinite(self.r_max)))

    @property
    def x0(self) -> float:
        """Midpoint of the initial-state range."""
        return 0.5 * (self.x0_min + self.x0_max)

    def blocks_regulation(self, grid: TimeGrid) -> bool:
        """A resource whose set-point delay exceeds T_C cannot track activation."""
        return self.delay > grid.T_C




class FreezerSpec(BaseModel):
    """Time-invariant freezer warehouse parameters."""
    model_config = ConfigDict(frozen=True)

    p_min: float = Field(0.0, description="Min. power consumption [kW]")
    p_max: float = Field(300.0, description="Max. power consumption [kW]")
    r_min: float = Field(-100.0 / 60.0, description="Min. ramp rate [kW/s]")
    r_max: float = Field(100.0 / 60.0, description="Max. ramp rate [kW/s]")
    x_bar: float = Field(1800.0, gt=0, description="Storage capacity [kWh]")
    theta_in_min: float = -29.0
    theta_in_max: float = -27.0
    theta_out: float = 5.0
    T_dis: float = Field(10 * SECONDS_PER_HOUR, gt=0, description="Passive discharge time [s]")
    fill: float = Field(0.5, ge=0.0, le=1.0, description="Initial fill fraction")
    delay: float = Field(DEFAULT_FREEZER_DELAY_S, ge=0, description="Set-point delay [s]")

    @model_validator(mode="after")
    def check_temperatures(self):
        if not self.theta_in_min < self.theta_in_max < self.theta_out:
            raise ResourceError(
                "Freezer temperatures must satisfy theta_in_min < theta_in_max < theta_out"
            )
        if self.p_min > self.p_max:
            raise ResourceError("Freezer p_min exceeds p_max")
        return self


def make_battery(p_max: float, x_bar: float, x0: float, grid: TimeGrid, label: str = "battery") -> ResourceParams:
    """Ideal energy buffer (a = b = 0, c = 1) with symmetric power limits."""
    if p_max <= 0:
        raise ResourceError(f"Battery p_max must be positive, got {p_max}")
    if x_bar < 0 or not 0 <= x0 <= x_bar:
        raise ResourceError(f"Battery requires 0 <= x0 <= x_bar, got x0={x0}, x_bar={x_bar}")
    n = grid.N_S
    return ResourceParams(
        p_min=np.full(n, -p_max),
        p_max=np.full(n, p_max),
        r_min=np.full(n, -math.inf),
        r_max=np.full(n, math.inf),
        x_min=np.zeros(n),
        x_max=np.full(n, x_bar),
        x0_min=x0,
        x0_max=x0,
        a=0.0,
        b=0.0,
        c=1.0,
        u=np.zeros(n),
        delay=0.0,
        label=label,
        kind="battery",
    )


def freezer_dynamics(spec: FreezerSpec) -> tuple[float, float, float]:
    """(a [1/s], b [kW/°C], u [°C]) of the freezer buffer.

    a = ln((θ_in_max − θ_out)/(θ_in_min − θ_out)) / T_dis, the variant that yields a
    negative rate with the usual sign conventions.
    """
    a = math.log((spec.theta_in_max - spec.theta_out) / (spec.theta_in_min - spec.theta_out)) / spec.T_dis
    b = SECONDS_PER_HOUR * a * spec.x_bar / (spec.theta_in_min - spec.theta_in_max)
    u = spec.theta_in_max - spec.theta_out
    return a, b, u


def make_freezer(spec: FreezerSpec, grid: TimeGrid, label: str = "freezer") -> ResourceParams:
    a, b, u = freezer_dynamics(spec)
    n = grid.N_S
    x0 = spec.fill * spec.x_bar
    return ResourceParams(
        p_min=np.full(n, spec.p_min),
        p_max=np.full(n, spec.p_max),
        r_min=np.full(n, spec.r_min),
        r_max=np.full(n, spec.r_max),
        x_min=np.zeros(n),
        x_max=np.full(n, spec.x_bar),
        x0_min=x0,
        x0_max=x0,
        a=a,
        b=b,
        c=1.0,
        u=np.full(n, u),
        delay=spec.delay,
        label=label,
        kind="freezer",
    )


def make_turbine(p_min: float, p_max: float, ramp: float, grid: TimeGrid, label: str = "turbine") -> ResourceParams:
    """Turbine without state limits; `ramp` in kW/min applies symmetrically."""
    if p_min > p_max:
        raise ResourceError(f"Turbine p_min={p_min} exceeds p_max={p_max}")
    if not ramp > 0:
        raise ResourceError(f"Turbine ramp must be positive, got {ramp}")
    n = grid.N_S
    r = ramp / 60.0
    return ResourceParams(
        p_min=np.full(n, p_min),
        p_max=np.full(n, p_max),
        r_min=np.full(n, -r),
        r_max=np.full(n, r),
        x_min=np.full(n, -math.inf),
        x_max=np.full(n, math.inf),
        x0_min=0.0,
        x0_max=0.0,
        a=0.0,
        b=0.0,
        c=1.0,
        u=np.zeros(n),
        delay=0.0,
        label=label,
        kind="turbine",
    )


def make_generic(grid: TimeGrid, **fields) -> ResourceParams:
    """Explicit parameter set; scalars are broadcast over the N_S intervals."""
    n = grid.N_S
    defaults = dict(
        r_min=-math.inf, r_max=math.inf, x_min=-math.inf, x_max=math.inf,
        x0_min=0.0, x0_max=0.0, a=0.0, b=0.0, c=1.0, u=0.0,
    )
    defaults.update(fields)
    for name in ("p_min", "p_max", "r_min", "r_max", "x_min", "x_max", "u"):
        defaults[name] = _as_series(defaults[name], n, name)
    return ResourceParams(**defaults)


def scale_resource(phi: ResourceParams, factor: float) -> ResourceParams:
    """Scale power, ramp and state quantities jointly by `factor` > 0."""
    if not factor > 0:
        raise ResourceError(f"Scaling factor must be positive, got {factor}")
    return replace(
        phi,
        p_min=phi.p_min * factor,
        p_max=phi.p_max * factor,
        r_min=phi.r_min * factor,
        r_max=phi.r_max * factor,
        x_min=phi.x_min * factor,
        x_max=phi.x_max * factor,
        x0_min=phi.x0_min * factor,
        x0_max=phi.x0_max * factor,
        b=phi.b * factor,
    )


def standalone_capacity(phi: ResourceParams, grid: TimeGrid) -> float:
    """Maximum symmetric time-invariant SFR capacity of a resource on its own [kW]."""
    if phi.blocks_regulation(grid):
        return 0.0
    terms = [float(np.min(phi.p_max - phi.p_min)) / 2.0]
    if np.any(np.isfinite(phi.x_max)):
        terms.append(float(np.min(phi.x_max) - phi.x0_max) * SECONDS_PER_HOUR / grid.T_SFR)
    if np.any(np.isfinite(phi.x_min)):
        terms.append(float(phi.x0_min - np.max(phi.x_min)) * SECONDS_PER_HOUR / grid.T_SFR)
    if np.any(np.isfinite(phi.r_max)):
        terms.append(float(np.min(phi.r_max)) * grid.T_C / 2.0)
    if np.any(np.isfinite(phi.r_min)):
        terms.append(-float(np.max(phi.r_min)) * grid.T_C / 2.0)
    return max(0.0, min(terms))


def steady_state_power(phi: ResourceParams, x: float, s: int = 1) -> float:
    """Power that keeps the state constant at x during interval s [kW]."""
    return -(SECONDS_PER_HOUR * phi.a * x + phi.b * phi.u[s - 1]) / phi.c


def temperature_of_state(spec: FreezerSpec, x):
    """Indoor temperature for buffer level x (x = x_bar is the cold end)."""
    span = spec.theta_in_max - spec.theta_in_min
    return spec.theta_in_max - np.asarray(x) * span / spec.x_bar


def state_of_temperature(spec: FreezerSpec, theta):
    span = spec.theta_in_max - spec.theta_in_min
    return spec.x_bar * (spec.theta_in_max - np.asarray(theta)) / span
