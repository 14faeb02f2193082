"""
Neutral linear-program container and solver contract.

Rows are sparse coefficient maps over VarRef keys. Two backends solve an
assembled LinearProgram: HiGHS through scipy.optimize.linprog (default) and a
dense two-phase tableau simplex using Bland's rule for small problems and
cross-checks.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

import numpy as np
import scipy.optimize
import scipy.sparse

from src.core.errors import LpError
from src.core.settings import LP_BACKEND, LP_MAX_ITERATIONS, LP_TOLERANCE

log = logging.getLogger(__name__)

Sense = Literal["<=", "="]
Status = Literal["optimal", "infeasible", "unbounded", "iteration_limit", "error"]


# ==================== Variables and rows ====================

@dataclass(frozen=True, order=True)
class VarRef:
    """Name of one LP column.

    owner is a resource index ("0", "1", ...) or a market/aggregate tag ("DA", "ID", "agg");
    kind is one of "Q", "q", "g" or "aux"; aux columns carry a family tag.
    """
    owner: str
    kind: str
    indices: tuple[int, ...]
    tag: str = ""

    def name(self) -> str:
        idx = "".join(f"[{i}]" for i in self.indices)
        if self.kind == "aux":
            return f"aux[{self.tag}{idx}]"
        return f"{self.kind}[{self.owner}]{idx}"


def aux(tag: str, *indices: int) -> VarRef:
    return VarRef(owner="aux", kind="aux", indices=tuple(indices), tag=tag)


@dataclass
class Row:
    coeffs: dict[VarRef, float]
    sense: Sense
    rhs: float

    def activity(self, values: dict[VarRef, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.coeffs.items())

    def residual(self, values: dict[VarRef, float]) -> float:
        """Positive amount by which the row is violated."""
        lhs = self.activity(values)
        if self.sense == "=":
            return abs(lhs - self.rhs)
        return max(0.0, lhs - self.rhs)


def _merge(*terms: Iterable[tuple[VarRef, float]]) -> dict[VarRef, float]:
    out: dict[VarRef, float] = {}
    for group in terms:
        for v, c in group:
            if c:
                out[v] = out.get(v, 0.0) + c
    return {v: c for v, c in out.items() if c}


def le(coeffs, rhs: float) -> Row:
    return Row(_merge(coeffs.items() if isinstance(coeffs, dict) else coeffs), "<=", float(rhs))


def ge(coeffs, rhs: float) -> Row:
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    return Row(_merge((v, -c) for v, c in items), "<=", -float(rhs))


def eq(coeffs, rhs: float) -> Row:
    return Row(_merge(coeffs.items() if isinstance(coeffs, dict) else coeffs), "=", float(rhs))


Bounds = tuple[float, float]
FREE: Bounds = (-math.inf, math.inf)
NONNEG: Bounds = (0.0, math.inf)


@dataclass
class RobustRowSet:
    """Linear rows of one constraint family plus the columns that family introduces."""
    tag: str
    rows: list[Row] = field(default_factory=list)
    variables: dict[VarRef, Bounds] = field(default_factory=dict)

    def add(self, row: Row) -> None:
        self.rows.append(row)

    def declare(self, var: VarRef, bounds: Bounds = FREE) -> VarRef:
        self.variables[var] = bounds
        return var

    def extend(self, other: "RobustRowSet") -> None:
        self.rows.extend(other.rows)
        self.variables.update(other.variables)

    def __len__(self) -> int:
        return len(self.rows)


# ==================== Linear program ====================

@dataclass
class LinearProgram:
    variables: list[VarRef]
    bounds: list[Bounds]
    rows: list[Row]
    objective: dict[VarRef, float]
    sense: Literal["max", "min"] = "max"
    row_tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.variables)}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def nnz(self) -> int:
        return sum(len(r.coeffs) for r in self.rows)

    def to_matrices(self):
        """(c, A_ub, b_ub, A_eq, b_eq, bounds) in minimisation form."""
        n = self.n_vars
        c = np.zeros(n)
        sign = -1.0 if self.sense == "max" else 1.0
        for v, coef in self.objective.items():
            c[self.index[v]] += sign * coef
        blocks = {"<=": ([], [], [], []), "=": ([], [], [], [])}
        for row in self.rows:
            rows_i, cols, vals, rhs = blocks[row.sense]
            r = len(rhs)
            for v, coef in row.coeffs.items():
                rows_i.append(r)
                cols.append(self.index[v])
                vals.append(coef)
            rhs.append(row.rhs)

        def build(key):
            rows_i, cols, vals, rhs = blocks[key]
            if not rhs:
                return None, None
            mat = scipy.sparse.csr_matrix((vals, (rows_i, cols)), shape=(len(rhs), n))
            return mat, np.asarray(rhs, dtype=float)

        A_ub, b_ub = build("<=")
        A_eq, b_eq = build("=")
        return c, A_ub, b_ub, A_eq, b_eq, list(self.bounds)


def assemble(
    parts: list[RobustRowSet],
    equalities: Optional[RobustRowSet] = None,
    objective: Optional[dict[VarRef, float]] = None,
    sense: Literal["max", "min"] = "max",
    variables: Optional[dict[VarRef, Bounds]] = None,
) -> LinearProgram:
    """Collect row sets into one LP with a deduplicated column table.

    Columns are declared by `variables` and by each row set; repeated declarations
    intersect their bounds. Rows keep the order of `parts`, then `equalities`.
    """
    table: dict[VarRef, Bounds] = {}

    def declare(var: VarRef, bounds: Bounds):
        lo, hi = bounds
        if var in table:
            lo = max(lo, table[var][0])
            hi = min(hi, table[var][1])
        if lo > hi:
            raise LpError(f"Conflicting bounds for {var.name()}: {lo} > {hi}")
        table[var] = (lo, hi)

    for var, bounds in (variables or {}).items():
        declare(var, bounds)
    all_parts = list(parts) + ([equalities] if equalities is not None else [])
    for part in all_parts:
        for var, bounds in part.variables.items():
            declare(var, bounds)

    rows: list[Row] = []
    tags: list[str] = []
    for part in all_parts:
        for row in part.rows:
            for var in row.coeffs:
                if var not in table:
                    raise LpError(f"Row in family '{part.tag}' references undeclared variable {var.name()}")
            rows.append(row)
            tags.append(part.tag)
    objective = dict(objective or {})
    for var in objective:
        if var not in table:
            raise LpError(f"Objective references undeclared variable {var.name()}")

    names = list(table)
    return LinearProgram(
        variables=names,
        bounds=[table[v] for v in names],
        rows=rows,
        objective=objective,
        sense=sense,
        row_tags=tags,
    )


# ==================== Solutions ====================

@dataclass
class LpSolution:
    status: Status
    values: dict[VarRef, float]
    objective_value: float
    iterations: int = 0
    backend: str = ""
    seconds: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def value(self, var: VarRef, default: float = 0.0) -> float:
        return self.values.get(var, default)


def check_solution(lp: LinearProgram, values: dict[VarRef, float]) -> float:
    """Largest row or bound violation of `values`."""
    worst = 0.0
    for row in lp.rows:
        worst = max(worst, row.residual(values))
    for var, (lo, hi) in zip(lp.variables, lp.bounds):
        x = values.get(var, 0.0)
        worst = max(worst, lo - x, x - hi)
    return worst


def solve(
    lp: LinearProgram,
    tolerance: float = LP_TOLERANCE,
    max_iterations: int = LP_MAX_ITERATIONS,
    backend: str = LP_BACKEND,
) -> LpSolution:
    """Solve `lp`; a failed solve is reported through `status`, never as a value."""
    started = time.perf_counter()
    if lp.n_vars == 0:
        feasible = all(row.residual({}) <= tolerance for row in lp.rows)
        return LpSolution("optimal" if feasible else "infeasible", {}, 0.0, backend=backend)
    if backend == "highs":
        solution = _solve_highs(lp, tolerance, max_iterations)
    elif backend == "simplex":
        solution = _solve_dense_simplex(lp, tolerance, max_iterations)
    else:
        raise LpError(f"Unknown LP backend '{backend}'")
    solution.seconds = time.perf_counter() - started
    log.info(
        "LP %s: %d vars, %d rows, %d nnz, status=%s, objective=%.6g, %.2fs",
        backend, lp.n_vars, len(lp.rows), lp.nnz, solution.status, solution.objective_value, solution.seconds,
    )
    return solution


_HIGHS_STATUS: dict[int, Status] = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded", 4: "error"}


def _solve_highs(lp: LinearProgram, tolerance: float, max_iterations: int) -> LpSolution:
    c, A_ub, b_ub, A_eq, b_eq, bounds = lp.to_matrices()
    bounds = [(None if math.isinf(lo) else lo, None if math.isinf(hi) else hi) for lo, hi in bounds]
    res = scipy.optimize.linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={
            "maxiter": max_iterations,
            "primal_feasibility_tolerance": tolerance,
            "dual_feasibility_tolerance": tolerance,
            "presolve": True,
        },
    )
    status = _HIGHS_STATUS.get(res.status, "error")
    if status != "optimal" or res.x is None:
        return LpSolution(status, {}, math.nan, iterations=int(getattr(res, "nit", 0) or 0), backend="highs", message=res.message)
    values = dict(zip(lp.variables, res.x.tolist()))
    objective = float(res.fun) * (-1.0 if lp.sense == "max" else 1.0)
    return LpSolution("optimal", values, objective, iterations=int(res.nit), backend="highs", message=res.message)


# ==================== Dense simplex ====================

def _standard_form(lp: LinearProgram):
    """Rewrite as min c'y, A y = b, y >= 0 with x = T y + shift."""
    c_min, A_ub, b_ub, A_eq, b_eq, bounds = lp.to_matrices()
    n = lp.n_vars
    cols: list[tuple[int, float]] = []  # (original var, sign) per y column
    shift = np.zeros(n)
    extra_ub: list[tuple[int, float]] = []  # (y column, upper bound) rows
    for j, (lo, hi) in enumerate(bounds):
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for col, (j, s) in enumerate(cols):
        T[j, col] = s

    blocks_A, blocks_b, is_ineq = [], [], []
    if A_ub is not None:
        blocks_A.append(A_ub.toarray() @ T)
        blocks_b.append(b_ub - A_ub @ shift)
        is_ineq += [True] * A_ub.shape[0]
    for col, ub in extra_ub:
        row = np.zeros((1, len(cols)))
        row[0, col] = 1.0
        blocks_A.append(row)
        blocks_b.append(np.array([ub]))
        is_ineq.append(True)
    if A_eq is not None:
        blocks_A.append(A_eq.toarray() @ T)
        blocks_b.append(b_eq - A_eq @ shift)
        is_ineq += [False] * A_eq.shape[0]

    ny = len(cols)
    if blocks_A:
        A = np.vstack(blocks_A)
        b = np.concatenate(blocks_b)
    else:
        A = np.zeros((0, ny))
        b = np.zeros(0)
    n_slack = sum(is_ineq)
    S = np.zeros((A.shape[0], n_slack))
    k = 0
    for i, ineq in enumerate(is_ineq):
        if ineq:
            S[i, k] = 1.0
            k += 1
    A = np.hstack([A, S])
    cost = np.concatenate([c_min @ T, np.zeros(n_slack)])
    negative = b < 0
    A[negative] *= -1.0
    b[negative] *= -1.0
    return A, b, cost, T, shift, float(c_min @ shift)


def _pivot(tab: np.ndarray, r: int, j: int) -> None:
    tab[r] /= tab[r, j]
    col = tab[:, j].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


def _run_bland(tab: np.ndarray, basis: list[int], n_cols: int, tol: float, budget: list[int]) -> str:
    m = len(basis)
    while True:
        if budget[0] <= 0:
            return "iteration_limit"
        reduced = tab[m, :n_cols]
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return "optimal"
        j = int(candidates[0])
        column = tab[:m, j]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return "unbounded"
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[np.abs(ratios - best) <= tol * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(tab, r, j)
        basis[r] = j
        budget[0] -= 1


def _solve_dense_simplex(lp: LinearProgram, tolerance: float, max_iterations: int) -> LpSolution:
    A, b, cost, T, shift, offset = _standard_form(lp)
    m, n = A.shape
    tol = max(tolerance, 1e-12)
    budget = [max_iterations]
    sign = -1.0 if lp.sense == "max" else 1.0

    # Phase 1: artificial basis
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -A.sum(axis=0)
    tab[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    status = _run_bland(tab, basis, n + m, tol, budget)
    iterations = max_iterations - budget[0]
    if status == "iteration_limit":
        return LpSolution(status, {}, math.nan, iterations=iterations, backend="simplex")
    if -tab[m, -1] > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LpSolution("infeasible", {}, math.nan, iterations=iterations, backend="simplex")

    # Drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nonzero = np.flatnonzero(np.abs(tab[r, :n]) > tol)
            if nonzero.size == 0:
                continue
            _pivot(tab, r, int(nonzero[0]))
            basis[r] = int(nonzero[0])
        keep.append(r)
    tab = np.vstack([tab[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]
    m = len(basis)

    # Phase 2
    tab[m, :n] = cost
    tab[m, -1] = 0.0
    for r, j in enumerate(basis):
        if tab[m, j] != 0.0:
            tab[m] -= tab[m, j] * tab[r]
    status = _run_bland(tab, basis, n, tol, budget)
    iterations = max_iterations - budget[0]
    if status != "optimal":
        return LpSolution(status, {}, math.nan, iterations=iterations, backend="simplex")
    y = np.zeros(n)
    for r, j in enumerate(basis):
        y[j] = tab[r, -1]
    x = T @ y[:T.shape[1]] + shift
    objective = sign * (float(cost[:T.shape[1]] @ y[:T.shape[1]]) + offset)
    return LpSolution("optimal", dict(zip(lp.variables, x.tolist())), objective, iterations=iterations, backend="simplex")


# ==================== Export ====================

def _lp_name(var: VarRef) -> str:
    return var.name().replace("][", "_").replace("[", "_").replace("]", "").replace(":", "_")


def to_lp_format(lp: LinearProgram) -> str:
    """Render the program in the CPLEX LP text format."""

    def expr(coeffs: dict[VarRef, float]) -> str:
        if not coeffs:
            return "0 " + _lp_name(lp.variables[0]) if lp.variables else "0"
        return " ".join(f"{'+' if c >= 0 else '-'} {abs(c):.12g} {_lp_name(v)}" for v, c in coeffs.items())

    lines = ["\\ " + "FlexPlanner export", "Maximize" if lp.sense == "max" else "Minimize", f" obj: {expr(lp.objective)}", "Subject To"]
    for i, row in enumerate(lp.rows):
        op = "=" if row.sense == "=" else "<="
        lines.append(f" r{i}: {expr(row.coeffs)} {op} {row.rhs:.12g}")
    lines.append("Bounds")
    for var, (lo, hi) in zip(lp.variables, lp.bounds):
        name = _lp_name(var)
        if math.isinf(lo) and math.isinf(hi):
            lines.append(f" {name} free")
        else:
            lo_s = "-inf" if math.isinf(lo) else f"{lo:.12g}"
            hi_s = "+inf" if math.isinf(hi) else f"{hi:.12g}"
            lines.append(f" {lo_s} <= {name} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def canonical_names(variables: Iterable[VarRef]) -> dict[VarRef, str]:
    """Canonical listing names; aux columns are numbered aux[t] in order of appearance."""
    names: dict[VarRef, str] = {}
    t = 0
    for var in variables:
        if var in names:
            continue
        if var.kind == "aux":
            names[var] = f"aux[{t}]"
            t += 1
        else:
            names[var] = var.name()
    return names


def dump_rows(row_set: RobustRowSet) -> str:
    """One row per line with canonical variable names, for debugging."""
    ordered = list(row_set.variables)
    for row in row_set.rows:
        ordered.extend(row.coeffs)
    names = canonical_names(ordered)
    lines = []
    for row in row_set.rows:
        terms = " ".join(f"{c:+.9g}*{names[v]}" for v, c in row.coeffs.items()) or "0"
        lines.append(f"{row_set.tag}: {terms} {row.sense} {row.rhs:.9g}")
    return "\n".join(lines) + ("\n" if lines else "")
