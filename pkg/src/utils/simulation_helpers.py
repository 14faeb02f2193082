"""
Continuous-time evaluation of solved policies under activation signals.

The activation w(t) is linear between the samples w_l at l*T_C (w_0 := w_1).
Reference power is linear between breakpoints at multiples of T_S, so target
power is affine on every control segment and states can be propagated exactly.
"""

import logging
import multiprocessing
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import scipy.signal

from src.core.errors import ScenarioError
from src.core.settings import SECONDS_PER_HOUR, SIMULATION_TOLERANCE, WORKERS
from src.models.policy import AffinePolicy
from src.models.resource import FreezerSpec, ResourceParams, temperature_of_state
from src.models.timegrid import TimeGrid, interval_of
from src.utils.dynamics_helpers import segment_weights
from src.utils.file_helpers import PathLike, read_column, write_column, write_table

log = logging.getLogger(__name__)


# ==================== Activation signals ====================

@dataclass(frozen=True, eq=False)
class ActivationSignal:
    """Samples w_1..w_N_C of an activation signal in [-1, 1]."""
    w: np.ndarray
    source: str = "custom"

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ScenarioError("Activation signal must be a nonempty 1-D sequence")
        if np.any(np.abs(w) > 1.0 + 1e-12):
            raise ScenarioError(f"Activation signal {self.source} leaves [-1, 1]")
        object.__setattr__(self, "w", np.clip(w, -1.0, 1.0))

    @property
    def points(self) -> np.ndarray:
        """Values at times 0, T_C, ..., N_C*T_C."""
        return np.concatenate(([self.w[0]], self.w))


def _check_length(signal: ActivationSignal, grid: TimeGrid) -> None:
    if signal.w.size != grid.N_C:
        raise ScenarioError(f"Signal has {signal.w.size} samples, grid needs N_C = {grid.N_C}")


def gen_signal(grid: TimeGrid, kind: str, value: float = 0.0, period: float = 0.0, amplitude: float = 1.0,
               step: float = 0.1, bias: float = 0.0, seed: Optional[int] = None) -> ActivationSignal:
    """Synthetic signal: "constant", "square" (period in seconds) or "walk" (bounded random walk)."""
    n = grid.N_C
    if kind == "constant":
        if abs(value) > 1:
            raise ScenarioError(f"Constant activation {value} outside [-1, 1]")
        return ActivationSignal(np.full(n, float(value)), source=f"constant:{value:g}")
    if kind == "square":
        if abs(amplitude) > 1:
            raise ScenarioError(f"Square amplitude {amplitude} outside [-1, 1]")
        half = period / 2.0
        if half < grid.T_C or not float(half / grid.T_C).is_integer():
            raise ScenarioError(f"Square half-period {half} s must be a positive multiple of T_C = {grid.T_C} s")
        l = np.arange(n)
        sign = np.where((l * grid.T_C // half) % 2 == 0, 1.0, -1.0)
        return ActivationSignal(amplitude * sign, source=f"square:{period:g}:{amplitude:g}")
    if kind == "walk":
        if step < 0 or abs(bias) > 1:
            raise ScenarioError(f"Invalid walk parameters step={step}, bias={bias}")
        rng = np.random.default_rng(seed)
        increments = rng.uniform(-step, step, size=n) + bias
        w = np.empty(n)
        level = 0.0
        for l in range(n):
            level = min(1.0, max(-1.0, level + increments[l]))
            w[l] = level
        return ActivationSignal(w, source=f"walk:{step:g}:{bias:g}:{seed}")
    raise ScenarioError(f"Unknown signal kind '{kind}'")


def parse_signal_spec(spec: str, grid: TimeGrid, seed: Optional[int] = None) -> ActivationSignal:
    """`constant:<c>`, `square:<period_s>[:<amplitude>]`, `walk:<step>[:<bias>]` or a CSV path."""
    parts = spec.split(":")
    try:
        if parts[0] == "constant" and len(parts) == 2:
            return gen_signal(grid, "constant", value=float(parts[1]))
        if parts[0] == "square" and len(parts) in (2, 3):
            amplitude = float(parts[2]) if len(parts) == 3 else 1.0
            return gen_signal(grid, "square", period=float(parts[1]), amplitude=amplitude)
        if parts[0] == "walk" and len(parts) in (2, 3):
            bias = float(parts[2]) if len(parts) == 3 else 0.0
            return gen_signal(grid, "walk", step=float(parts[1]), bias=bias, seed=seed)
    except ValueError as e:
        raise ScenarioError(f"Invalid signal specification '{spec}': {e}")
    return read_signal_csv(spec, grid)


def read_signal_csv(path: PathLike, grid: TimeGrid) -> ActivationSignal:
    """One sample per line; values outside [-1, 1] are clipped and counted."""
    w = read_column(path)
    clipped = int(np.count_nonzero(np.abs(w) > 1.0))
    if clipped:
        log.warning("Clipped %d of %d samples of %s to [-1, 1]", clipped, w.size, path)
    signal = ActivationSignal(np.clip(w, -1.0, 1.0), source=f"csv:{path}")
    _check_length(signal, grid)
    return signal


def write_signal_csv(path: PathLike, signal: ActivationSignal):
    return write_column(path, signal.w)


def interval_averages(signal: ActivationSignal, grid: TimeGrid) -> np.ndarray:
    """w̃_s: exact mean of the interpolated signal over every system interval."""
    _check_length(signal, grid)
    pts = signal.points
    seg = 0.5 * (pts[:-1] + pts[1:])
    return seg.reshape(grid.N_S, grid.steps_per_system).mean(axis=1)


# ==================== Power ====================

def _signal_value(signal: ActivationSignal, grid: TimeGrid, t):
    return np.interp(t, np.arange(grid.N_C + 1) * grid.T_C, signal.points)


def eval_power(policy: AffinePolicy, w_avg, signal: ActivationSignal, grid: TimeGrid, t: float) -> tuple[float, float]:
    """(p_ref(t), p_tgt(t)) in kW; inside interval s, p_tgt = p_ref + γ_s w(t)."""
    if not 0 <= t <= grid.T_H:
        raise ScenarioError(f"Time {t} outside [0, {grid.T_H}]")
    bp = policy.breakpoints(w_avg)
    p_ref = float(np.interp(t, np.arange(grid.N_S + 1) * grid.T_S, bp))
    s = interval_of(grid, "S", t)
    gamma = policy.gamma_or_zero()[s - 1]
    return p_ref, p_ref + float(gamma * _signal_value(signal, grid, t))


# ==================== Traces ====================

@dataclass
class Violation:
    resource: str
    family: str  # "power", "ramp" or "state"
    time: float
    value: float
    bound: float
    excess: float

    def __str__(self) -> str:
        return (f"{self.resource}: {self.family} at t={self.time:.0f} s, "
                f"value {self.value:.6g} vs bound {self.bound:.6g} (excess {self.excess:.3g})")


@dataclass
class ResourceTrace:
    label: str
    p_ref: np.ndarray       # at samples 0..N_C
    seg_start: np.ndarray   # p_tgt at the start of control segment 1..N_C
    seg_end: np.ndarray     # p_tgt at the end of control segment 1..N_C
    gamma: np.ndarray       # γ of each control segment
    x: Optional[np.ndarray] = None
    e_up: Optional[np.ndarray] = None
    e_dn: Optional[np.ndarray] = None

    @property
    def p_tgt(self) -> np.ndarray:
        """Samples 0..N_C; the value at a segment end is its left limit."""
        return np.concatenate(([self.seg_start[0]], self.seg_end))


@dataclass
class SimulationTrace:
    times: np.ndarray
    w: np.ndarray
    w_avg: np.ndarray
    resources: list[ResourceTrace]
    violations: list[Violation] = field(default_factory=list)
    source: str = ""

    @property
    def aggregate_p_ref(self) -> np.ndarray:
        return np.sum([r.p_ref for r in self.resources], axis=0)

    @property
    def aggregate_p_tgt(self) -> np.ndarray:
        return np.sum([r.p_tgt for r in self.resources], axis=0)

    @property
    def aggregate_gamma(self) -> np.ndarray:
        return np.sum([r.gamma for r in self.resources], axis=0)


def _segment_gamma(policy: AffinePolicy, grid: TimeGrid) -> np.ndarray:
    return np.repeat(policy.gamma_or_zero(), grid.steps_per_system)


def integrate_state(phi: ResourceParams, seg_start: np.ndarray, seg_end: np.ndarray, grid: TimeGrid,
                    x0: Optional[float] = None) -> np.ndarray:
    """States at samples 0..N_C for a target power affine on each control segment."""
    if x0 is None:
        x0 = phi.x0
    w = segment_weights(phi.a, grid.T_C)
    u = np.repeat(phi.u, grid.steps_per_system)
    drive = (phi.c * (w.beta_start * seg_start + w.beta_end * seg_end) + w.alpha * phi.b * u) / SECONDS_PER_HOUR
    # x_l = ρ x_{l-1} + drive_l
    x, _ = scipy.signal.lfilter([1.0], [1.0, -w.rho], drive, zi=[w.rho * x0])
    return np.concatenate(([x0], x))


def _positive_area(g0: np.ndarray, g1: np.ndarray, length: float) -> np.ndarray:
    """∫ max(g, 0) over segments where g is linear from g0 to g1."""
    both = (g0 >= 0) & (g1 >= 0)
    cross = (g0 > 0) != (g1 > 0)
    out = np.where(both, 0.5 * (g0 + g1) * length, 0.0)
    span = np.abs(g0) + np.abs(g1)
    peak = np.maximum(g0, g1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tri = np.where(span > 0, 0.5 * length * peak * peak / span, 0.0)
    return np.where(cross & ~both, tri, out)


def regulation_energy(gamma: np.ndarray, signal: ActivationSignal, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """(e_up, e_dn) in kWh per intra-day interval for the per-segment capacity `gamma`."""
    pts = signal.points
    g0 = gamma * pts[:-1]
    g1 = gamma * pts[1:]
    up = _positive_area(g0, g1, grid.T_C)
    dn = _positive_area(-g0, -g1, grid.T_C)
    per_id = grid.T_ID // grid.T_C
    return (up.reshape(grid.N_ID, per_id).sum(axis=1) / SECONDS_PER_HOUR,
            dn.reshape(grid.N_ID, per_id).sum(axis=1) / SECONDS_PER_HOUR)


def simulate_policy(policy: AffinePolicy, phi: ResourceParams, signal: ActivationSignal, grid: TimeGrid,
                    w_avg: Optional[np.ndarray] = None, x0: Optional[float] = None) -> ResourceTrace:
    if w_avg is None:
        w_avg = interval_averages(signal, grid)
    bp = policy.breakpoints(w_avg)
    times = np.arange(grid.N_C + 1) * grid.T_C
    p_ref = np.interp(times, np.arange(grid.N_S + 1) * grid.T_S, bp)
    gamma = _segment_gamma(policy, grid)
    pts = signal.points
    seg_start = p_ref[:-1] + gamma * pts[:-1]
    seg_end = p_ref[1:] + gamma * pts[1:]
    x = integrate_state(phi, seg_start, seg_end, grid, x0) if phi.has_state else None
    e_up, e_dn = regulation_energy(gamma, signal, grid)
    return ResourceTrace(phi.label, p_ref, seg_start, seg_end, gamma, x, e_up, e_dn)


def simulate_policies(policies: Sequence[AffinePolicy], phis: Sequence[ResourceParams], signal: ActivationSignal,
                      grid: TimeGrid, tolerance: float = SIMULATION_TOLERANCE) -> SimulationTrace:
    """Trace of every resource under one signal, with its violation log."""
    if len(policies) != len(phis):
        raise ScenarioError(f"{len(policies)} policies for {len(phis)} resources")
    _check_length(signal, grid)
    for policy in policies:
        if policy.n != grid.N_S:
            raise ScenarioError(f"Policy has N_S = {policy.n}, grid has N_S = {grid.N_S}")
    w_avg = interval_averages(signal, grid)
    resources = [simulate_policy(p, phi, signal, grid, w_avg) for p, phi in zip(policies, phis)]
    trace = SimulationTrace(
        times=np.arange(grid.N_C + 1) * float(grid.T_C),
        w=signal.points,
        w_avg=w_avg,
        resources=resources,
        source=signal.source,
    )
    trace.violations = verify_trace(trace, phis, grid, tolerance)
    return trace


# ==================== Verification ====================

def _worst(label: str, family: str, times: np.ndarray, value: np.ndarray, lower: np.ndarray, upper: np.ndarray,
           tol: float) -> Optional[Violation]:
    with np.errstate(invalid="ignore"):
        over = np.where(np.isfinite(upper), value - upper - tol * np.maximum(1.0, np.abs(upper)), -np.inf)
        under = np.where(np.isfinite(lower), lower - value - tol * np.maximum(1.0, np.abs(lower)), -np.inf)
    excess = np.maximum(over, under)
    i = int(np.argmax(excess))
    if not excess[i] > 0:
        return None
    bound = upper[i] if over[i] >= under[i] else lower[i]
    return Violation(label, family, float(times[i]), float(value[i]), float(bound), float(abs(value[i] - bound)))


def verify_trace(trace: SimulationTrace, phis: Sequence[ResourceParams], grid: TimeGrid,
                 tolerance: float = SIMULATION_TOLERANCE) -> list[Violation]:
    """Worst violation per resource and family; empty when every limit holds."""
    report: list[Violation] = []
    spc = grid.steps_per_system
    t = trace.times
    for rt, phi in zip(trace.resources, phis):
        seg_interval = np.arange(grid.N_C) // spc
        p_lo = phi.p_min[seg_interval]
        p_hi = phi.p_max[seg_interval]
        checks = [
            _worst(rt.label, "power", t[:-1], rt.seg_start, p_lo, p_hi, tolerance),
            _worst(rt.label, "power", t[1:], rt.seg_end, p_lo, p_hi, tolerance),
        ]
        power = [v for v in checks if v is not None]
        if power:
            report.append(max(power, key=lambda v: v.excess))
        if phi.has_ramp:
            slope = (rt.seg_end - rt.seg_start) / grid.T_C
            v = _worst(rt.label, "ramp", t[1:], slope, phi.r_min[seg_interval], phi.r_max[seg_interval], tolerance)
            if v is not None:
                report.append(v)
        if rt.x is not None:
            # Sample l closes segment l and opens segment l+1
            before = np.concatenate(([0], seg_interval))
            after = np.concatenate((seg_interval, [grid.N_S - 1]))
            checks = [
                _worst(rt.label, "state", t, rt.x, phi.x_min[before], phi.x_max[before], tolerance),
                _worst(rt.label, "state", t, rt.x, phi.x_min[after], phi.x_max[after], tolerance),
            ]
            state = [v for v in checks if v is not None]
            if state:
                report.append(max(state, key=lambda v: v.excess))
    return report


# ==================== Oracle ====================

@dataclass
class OracleReport:
    signals: int
    failed: list[tuple[str, list[Violation]]]

    @property
    def ok(self) -> bool:
        return not self.failed


def _oracle_case(args) -> tuple[str, list[Violation]]:
    policies, phis, grid, step, bias, seed, tolerance = args
    signal = gen_signal(grid, "walk", step=step, bias=bias, seed=seed)
    trace = simulate_policies(policies, phis, signal, grid, tolerance)
    return signal.source, trace.violations


def run_oracle(policies: Sequence[AffinePolicy], phis: Sequence[ResourceParams], grid: TimeGrid,
               signals: int, step: float = 0.1, biases: Sequence[float] = (0.0, 0.02, -0.02), seed: int = 0,
               tolerance: float = SIMULATION_TOLERANCE, workers: int = WORKERS) -> OracleReport:
    """Simulate `signals` seeded bounded walks, cycling through `biases`."""
    cases = [(list(policies), list(phis), grid, step, biases[i % len(biases)], seed + i, tolerance)
             for i in range(signals)]
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.map(_oracle_case, cases)
    else:
        results = [_oracle_case(c) for c in cases]
    failed = [(source, violations) for source, violations in results if violations]
    log.info("Oracle: %d signals, %d with violations", signals, len(failed))
    return OracleReport(signals=signals, failed=failed)


# ==================== Export ====================

def trace_frame(trace: SimulationTrace, freezers: Optional[dict[str, FreezerSpec]] = None) -> pd.DataFrame:
    """Wide table: time, w, per-resource p_ref/p_tgt/x (and temperature for freezers), aggregate."""
    freezers = freezers or {}
    columns: dict[str, np.ndarray] = {"time_s": trace.times, "w": trace.w}
    for rt in trace.resources:
        columns[f"{rt.label}_p_ref_kW"] = rt.p_ref
        columns[f"{rt.label}_p_tgt_kW"] = rt.p_tgt
        if rt.x is not None:
            columns[f"{rt.label}_x_kWh"] = rt.x
            if rt.label in freezers:
                columns[f"{rt.label}_theta_C"] = temperature_of_state(freezers[rt.label], rt.x)
    columns["agg_p_ref_kW"] = trace.aggregate_p_ref
    columns["agg_p_tgt_kW"] = trace.aggregate_p_tgt
    return pd.DataFrame(columns)


def write_trace_csv(path: PathLike, trace: SimulationTrace, freezers: Optional[dict[str, FreezerSpec]] = None):
    return write_table(path, trace_frame(trace, freezers))


def regulation_frame(trace: SimulationTrace, grid: TimeGrid) -> pd.DataFrame:
    columns: dict[str, np.ndarray] = {"interval": np.arange(1, grid.N_ID + 1)}
    for rt in trace.resources:
        columns[f"{rt.label}_e_up_kWh"] = rt.e_up
        columns[f"{rt.label}_e_dn_kWh"] = rt.e_dn
    return pd.DataFrame(columns)

