"""
Robust counterparts of the power, ramp-rate and state constraints of one resource.

Every function turns a family of constraints that must hold for all averaged
activations w̃ in [-1, 1]^N_S into finitely many linear rows over the policy
columns {Q, q, g} and auxiliary columns. The worst case of an affine term
Q_k w̃ over the box is ‖Q_k‖₁, represented by an epigraph column.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.lpcore import FREE, NONNEG, RobustRowSet, VarRef, aux, eq, ge, le
from src.core.settings import SECONDS_PER_HOUR
from src.models.policy import PolicyStructure
from src.models.resource import ResourceParams
from src.models.timegrid import TimeGrid
from src.utils.dynamics_helpers import segment_weights

Expr = dict[VarRef, float]


def _add(expr: Expr, var: Optional[VarRef], coef: float) -> Expr:
    if var is not None and coef:
        expr[var] = expr.get(var, 0.0) + coef
    return expr


def _combine(*parts: tuple[Expr, float]) -> Expr:
    out: Expr = {}
    for expr, scale in parts:
        for var, coef in expr.items():
            _add(out, var, scale * coef)
    return out


# ==================== Policy columns ====================

@dataclass(frozen=True)
class PolicyVars:
    """Column names of one policy {Q, q, g}.

    Q[owner][m][n] uses the 1-based row m = k + 1 of breakpoint k. With a
    time-invariant γ every interval shares the single column g[owner][1].
    """
    owner: str
    structure: PolicyStructure
    with_gamma: bool = True
    gamma_fixed_zero: bool = False

    def Q(self, k: int, n: int) -> Optional[VarRef]:
        if not self.structure.allowed(k, n):
            return None
        return VarRef(self.owner, "Q", (k + 1, n))

    def q(self, k: int) -> VarRef:
        return VarRef(self.owner, "q", (k + 1,))

    def g(self, k: int) -> Optional[VarRef]:
        """γ column of interval k (1-based), None when γ is absent or pinned to zero."""
        if not self.with_gamma or self.gamma_fixed_zero:
            return None
        return VarRef(self.owner, "g", (1,) if self.structure.time_invariant_gamma else (k,))

    def gamma_columns(self) -> list[VarRef]:
        if not self.with_gamma or self.gamma_fixed_zero:
            return []
        count = 1 if self.structure.time_invariant_gamma else self.structure.n
        return [VarRef(self.owner, "g", (k,)) for k in range(1, count + 1)]

    def row_entries(self, k: int) -> list[tuple[int, VarRef]]:
        return [(n, VarRef(self.owner, "Q", (k + 1, n))) for n in self.structure.columns(k)]

    def declarations(self) -> dict[VarRef, tuple[float, float]]:
        decl: dict[VarRef, tuple[float, float]] = {}
        for k, n in self.structure.entries():
            decl[VarRef(self.owner, "Q", (k + 1, n))] = FREE
        for k in range(self.structure.n + 1):
            decl[self.q(k)] = FREE
        for var in self.gamma_columns():
            decl[var] = NONNEG
        return decl


# ==================== 1-norm epigraph ====================

def norm1_epigraph(entries: list[Expr], row_set: RobustRowSet, tag: str, *index: int) -> Optional[VarRef]:
    """Column s with s >= ‖(e_1, ..., e_n)‖₁ at any feasible point, or None when there are no entries.

    A single entry is bounded by two rows on s directly; several entries get one
    t_i >= |e_i| each and s = Σ t_i.
    """
    entries = [e for e in entries if e]
    if not entries:
        return None
    s = row_set.declare(aux(f"{tag}.s", *index), NONNEG)
    if len(entries) == 1:
        row_set.add(ge(_combine(({s: 1.0}, 1.0), (entries[0], -1.0)), 0.0))
        row_set.add(ge(_combine(({s: 1.0}, 1.0), (entries[0], 1.0)), 0.0))
        return s
    total: Expr = {s: 1.0}
    for i, expr in enumerate(entries):
        t = row_set.declare(aux(f"{tag}.t", *index, i), NONNEG)
        row_set.add(ge(_combine(({t: 1.0}, 1.0), (expr, -1.0)), 0.0))
        row_set.add(ge(_combine(({t: 1.0}, 1.0), (expr, 1.0)), 0.0))
        total[t] = -1.0
    row_set.add(eq(total, 0.0))
    return s


def _row_norm(pv: PolicyVars, k: int, row_set: RobustRowSet, tag: str) -> Optional[VarRef]:
    return norm1_epigraph([{var: 1.0} for _, var in pv.row_entries(k)], row_set, f"{tag}.Q", k)


def _diff_norm(pv: PolicyVars, k: int, row_set: RobustRowSet, tag: str, with_q: bool = False) -> Optional[VarRef]:
    """Epigraph of ‖Q_k − Q_{k−1}‖₁ (plus |q_k − q_{k−1}| when `with_q`)."""
    columns = sorted(set(pv.structure.columns(k)) | set(pv.structure.columns(k - 1)))
    entries = [_add(_add({}, pv.Q(k, n), 1.0), pv.Q(k - 1, n), -1.0) for n in columns]
    if with_q:
        entries.append({pv.q(k): 1.0, pv.q(k - 1): -1.0})
    return norm1_epigraph(entries, row_set, f"{tag}.dQ", k)


# ==================== Power ====================

def power_rows(phi: ResourceParams, pv: PolicyVars) -> RobustRowSet:
    """Worst-case power limits at every breakpoint with the clamped interval indices."""
    row_set = RobustRowSet(tag=f"power[{pv.owner}]")
    n = pv.structure.n
    for k in range(n + 1):
        lo = max(1, k)
        hi = min(n, k + 1)
        s = _row_norm(pv, k, row_set, row_set.tag)
        upper_cap = min(phi.p_max[lo - 1], phi.p_max[hi - 1])
        lower_cap = max(phi.p_min[lo - 1], phi.p_min[hi - 1])
        for interval, p_max, p_min in ((lo, phi.p_max[lo - 1], phi.p_min[lo - 1]), (hi, upper_cap, lower_cap)):
            g = pv.g(interval)
            upper = _add(_add({pv.q(k): 1.0}, s, 1.0), g, 1.0)
            lower = _add(_add({pv.q(k): 1.0}, s, -1.0), g, -1.0)
            row_set.add(le(upper, p_max))
            row_set.add(ge(lower, p_min))
    return row_set


# ==================== Ramp ====================

def ramp_rows(phi: ResourceParams, pv: PolicyVars, grid: TimeGrid) -> RobustRowSet:
    """Worst-case ramp limits of the target power inside every system interval."""
    row_set = RobustRowSet(tag=f"ramp[{pv.owner}]")
    if not phi.has_ramp:
        return row_set
    n = pv.structure.n
    T_S, T_C = grid.T_S, grid.T_C
    for k in range(1, n + 1):
        d = _diff_norm(pv, k, row_set, row_set.tag)
        slope = {pv.q(k): 1.0 / T_S, pv.q(k - 1): -1.0 / T_S}
        pairs = [[(pv.g(k), 2.0 / T_C)]]
        # Identical to the first family when every interval shares one γ column
        if k < n and not pv.structure.time_invariant_gamma:
            pairs.append([(pv.g(k), 1.0 / T_C), (pv.g(k + 1), 1.0 / T_C)])
        for gamma_terms in pairs:
            if math.isfinite(phi.r_max[k - 1]):
                upper = _add(dict(slope), d, 1.0 / T_S)
                for var, coef in gamma_terms:
                    _add(upper, var, coef)
                row_set.add(le(upper, phi.r_max[k - 1]))
            if math.isfinite(phi.r_min[k - 1]):
                lower = _add(dict(slope), d, -1.0 / T_S)
                for var, coef in gamma_terms:
                    _add(lower, var, -coef)
                row_set.add(ge(lower, phi.r_min[k - 1]))
    return row_set


# ==================== State ====================

def state_offsets(phi: ResourceParams, grid: TimeGrid, x0: float) -> np.ndarray:
    """Breakpoint states 0..N_S driven by x(0) = x0 and the exogenous input alone."""
    w = segment_weights(phi.a, grid.T_S)
    out = np.empty(grid.N_S + 1)
    out[0] = x0
    for s in range(1, grid.N_S + 1):
        out[s] = w.rho * out[s - 1] + w.alpha * phi.b * phi.u[s - 1] / SECONDS_PER_HOUR
    return out


def state_rows(phi: ResourceParams, pv: PolicyVars, grid: TimeGrid) -> RobustRowSet:
    """Worst-case state limits over the whole horizon.

    Breakpoint states are propagated exactly through the segment recursion
    x_s = ρ x_{s−1} + (α b u_s + c β₀ p_{s−1} + c β₁ p_s)/3600 + ψ γ_s w̃_s.
    The coefficient X[s, n] of w̃_n is an explicit column only while Q may still
    change it; afterwards it decays as ρ^{s−s₀} and is carried by the tail
    accumulator A_s. Each interval's bounds are enforced at both of its
    endpoints, tightened by the intra-interval margin.
    """
    tag = f"state[{pv.owner}]"
    row_set = RobustRowSet(tag=tag)
    if not phi.has_state:
        return row_set
    n = pv.structure.n
    H = SECONDS_PER_HOUR
    T_S = grid.T_S
    w = segment_weights(phi.a, T_S)
    rho, c = w.rho, phi.c
    psi = c * w.alpha / H

    # Nominal part driven by q
    y: list[Optional[VarRef]] = [None]
    for s in range(1, n + 1):
        ys = row_set.declare(aux(f"{tag}.y", s), FREE)
        rhs_expr = _add(_add({ys: 1.0}, y[s - 1], -rho), pv.q(s - 1), -c * w.beta_start / H)
        _add(rhs_expr, pv.q(s), -c * w.beta_end / H)
        row_set.add(eq(rhs_expr, 0.0))
        y.append(ys)

    # Absolute activation coefficients: explicit[s] collects |X[s, n]| bounds for n <= s <= s0(n)
    explicit: list[list[Expr]] = [[] for _ in range(n + 1)]
    entering_tail: list[list[Expr]] = [[] for _ in range(n + 1)]
    for col in range(1, n + 1):
        g = pv.g(col)
        k_last = pv.structure.last_row(col)
        if g is None and k_last is None:
            continue
        own = _add({}, g, psi)  # X[col, col] = ψ γ_col
        abs_own = _add({}, g, abs(psi))
        explicit[col].append(abs_own)
        s_end = col if k_last is None else min(n, k_last + 1)
        previous = own
        last_abs = abs_own
        for s in range(col + 1, s_end + 1):
            x_var = row_set.declare(aux(f"{tag}.X", s, col), FREE)
            expr = _combine(({x_var: 1.0}, 1.0), (previous, -rho))
            _add(expr, pv.Q(s - 1, col), -c * w.beta_start / H)
            _add(expr, pv.Q(s, col), -c * w.beta_end / H)
            row_set.add(eq(expr, 0.0))
            t = row_set.declare(aux(f"{tag}.t", s, col), NONNEG)
            row_set.add(ge({t: 1.0, x_var: -1.0}, 0.0))
            row_set.add(ge({t: 1.0, x_var: 1.0}, 0.0))
            explicit[s].append({t: 1.0})
            previous = {x_var: 1.0}
            last_abs = {t: 1.0}
        if s_end < n:
            entering_tail[s_end].append(last_abs)

    # Tail accumulator A_s = ρ (A_{s−1} + Σ entering at s−1)
    tail: list[Expr] = [{}]
    for s in range(1, n + 1):
        incoming = _combine((tail[s - 1], 1.0), *[(e, 1.0) for e in entering_tail[s - 1]])
        if not incoming:
            tail.append({})
            continue
        a_var = row_set.declare(aux(f"{tag}.A", s), NONNEG)
        row_set.add(eq(_combine(({a_var: 1.0}, 1.0), (incoming, -rho)), 0.0))
        tail.append({a_var: 1.0})

    spread: list[Expr] = [{}]
    for s in range(1, n + 1):
        spread.append(_combine((tail[s], 1.0), *[(e, 1.0) for e in explicit[s]]))

    offsets_hi = state_offsets(phi, grid, phi.x0_max)
    offsets_lo = state_offsets(phi, grid, phi.x0_min)

    for s in range(1, n + 1):
        margin: Expr = {}
        g = pv.g(s)
        _add(margin, g, abs(c) * ((1.0 - rho) * T_S / 2.0 + T_S / 2.0) / H)
        bow = _diff_norm(pv, s, row_set, tag, with_q=True)
        _add(margin, bow, abs(c) * T_S / 8.0 / H)
        for e in (s - 1, s):
            if math.isfinite(phi.x_max[s - 1]):
                upper = _combine(({y[e]: 1.0} if y[e] else {}, 1.0), (spread[e], 1.0), (margin, 1.0))
                row_set.add(le(upper, phi.x_max[s - 1] - offsets_hi[e]))
            if math.isfinite(phi.x_min[s - 1]):
                lower = _combine(({y[e]: 1.0} if y[e] else {}, 1.0), (spread[e], -1.0), (margin, -1.0))
                row_set.add(ge(lower, phi.x_min[s - 1] - offsets_lo[e]))
    return row_set


def resource_rows(phi: ResourceParams, pv: PolicyVars, grid: TimeGrid, families=("power", "ramp", "state")) -> list[RobustRowSet]:
    """All robust-counterpart families of one resource in a stable order."""
    builders = {
        "power": lambda: power_rows(phi, pv),
        "ramp": lambda: ramp_rows(phi, pv, grid),
        "state": lambda: state_rows(phi, pv, grid),
    }
    return [builders[name]() for name in ("power", "ramp", "state") if name in families]
