import math

import numpy as np
import pytest
from hypothesis import Phase, given, settings, strategies as st

from src.core.errors import LpError
from src.core.lpcore import (
    FREE,
    NONNEG,
    RobustRowSet,
    VarRef,
    assemble,
    aux,
    canonical_names,
    check_solution,
    dump_rows,
    eq,
    ge,
    le,
    solve,
    to_lp_format,
)

X = VarRef("0", "q", (1,))
Y = VarRef("0", "q", (2,))


def small_program(sense="max"):
    """max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 (optimum 2.8 at (1.6, 1.2))."""
    rows = RobustRowSet(tag="small")
    rows.declare(X, NONNEG)
    rows.declare(Y, NONNEG)
    rows.add(le({X: 1.0, Y: 2.0}, 4.0))
    rows.add(le({X: 3.0, Y: 1.0}, 6.0))
    return assemble([rows], objective={X: 1.0, Y: 1.0}, sense=sense)


@pytest.fixture
def program():
    return small_program()


# ==================== Rows and assembly ====================

class TestRows:

    def test_row_helpers(self):
        row = ge({X: 2.0, Y: 0.0}, 1.0)
        assert row.sense == "<="
        assert row.coeffs == {X: -2.0}
        assert row.rhs == -1.0
        assert row.residual({X: 0.25}) == pytest.approx(0.5)
        assert eq({X: 1.0}, 2.0).residual({X: 3.0}) == pytest.approx(1.0)

    def test_names(self):
        assert VarRef("0", "Q", (3, 1)).name() == "Q[0][3][1]"
        assert aux("power[0].s", 2).name() == "aux[power[0].s[2]]"

    def test_conflicting_bounds(self):
        rows = RobustRowSet(tag="conflict")
        rows.declare(X, (2.0, 3.0))
        with pytest.raises(LpError):
            assemble([rows], variables={X: (0.0, 1.0)})

    def test_bounds_intersect(self):
        rows = RobustRowSet(tag="narrow")
        rows.declare(X, (0.0, 5.0))
        lp = assemble([rows], variables={X: (-1.0, 3.0)})
        assert lp.bounds == [(0.0, 3.0)]

    def test_undeclared_variable(self):
        rows = RobustRowSet(tag="loose")
        rows.add(le({X: 1.0}, 1.0))
        with pytest.raises(LpError) as exc:
            assemble([rows])
        assert "loose" in exc.value.detail
        with pytest.raises(LpError):
            assemble([], objective={X: 1.0})

    def test_row_tags_follow_parts(self, program):
        assert program.row_tags == ["small", "small"]
        assert program.n_vars == 2
        assert program.nnz == 4


# ==================== Solving ====================

class TestSolve:

    @pytest.mark.parametrize("backend", ["highs", "simplex"])
    def test_small_program(self, program, backend):
        sol = solve(program, backend=backend)
        assert sol.ok
        assert sol.objective_value == pytest.approx(2.8, abs=1e-7)
        assert sol.value(X) == pytest.approx(1.6, abs=1e-7)
        assert sol.value(Y) == pytest.approx(1.2, abs=1e-7)
        assert check_solution(program, sol.values) <= 1e-7

    @pytest.mark.parametrize("backend", ["highs", "simplex"])
    def test_dual_program_has_equal_value(self, backend):
        # min 4u + 6v s.t. u + 3v >= 1, 2u + v >= 1, u, v >= 0
        u, v = VarRef("d", "q", (1,)), VarRef("d", "q", (2,))
        rows = RobustRowSet(tag="dual")
        rows.declare(u, NONNEG)
        rows.declare(v, NONNEG)
        rows.add(ge({u: 1.0, v: 3.0}, 1.0))
        rows.add(ge({u: 2.0, v: 1.0}, 1.0))
        sol = solve(assemble([rows], objective={u: 4.0, v: 6.0}, sense="min"), backend=backend)
        assert sol.ok
        assert sol.objective_value == pytest.approx(2.8, abs=1e-7)

    @pytest.mark.parametrize("backend", ["highs", "simplex"])
    def test_infeasible(self, backend):
        rows = RobustRowSet(tag="clash")
        rows.declare(X, FREE)
        rows.add(ge({X: 1.0}, 2.0))
        rows.add(le({X: 1.0}, 1.0))
        sol = solve(assemble([rows], objective={X: 1.0}), backend=backend)
        assert sol.status == "infeasible"
        assert not sol.ok
        assert sol.values == {}

    def test_unbounded(self):
        rows = RobustRowSet(tag="open")
        rows.declare(X, FREE)
        rows.add(ge({X: 1.0}, 0.0))
        lp = assemble([rows], objective={X: 1.0})
        assert solve(lp, backend="simplex").status == "unbounded"
        # HiGHS may only certify "unbounded or infeasible" after presolve
        assert not solve(lp, backend="highs").ok

    @pytest.mark.parametrize("backend", ["highs", "simplex"])
    def test_equality_and_free_columns(self, backend):
        # max x - y s.t. x + y = 1, x <= 3, y free and >= -5 by row
        rows = RobustRowSet(tag="eq")
        rows.declare(X, (-math.inf, 3.0))
        rows.declare(Y, FREE)
        rows.add(eq({X: 1.0, Y: 1.0}, 1.0))
        rows.add(ge({Y: 1.0}, -5.0))
        sol = solve(assemble([rows], objective={X: 1.0, Y: -1.0}), backend=backend)
        assert sol.ok
        assert sol.objective_value == pytest.approx(5.0, abs=1e-7)
        assert sol.value(X) == pytest.approx(3.0, abs=1e-7)

    def test_row_order_does_not_change_optimum(self):
        first = RobustRowSet(tag="a")
        first.declare(X, NONNEG)
        first.declare(Y, NONNEG)
        first.add(le({X: 1.0, Y: 2.0}, 4.0))
        second = RobustRowSet(tag="b")
        second.add(le({X: 3.0, Y: 1.0}, 6.0))
        forward = solve(assemble([first, second], objective={X: 1.0, Y: 1.0}))
        backward = solve(assemble([second, first], objective={X: 1.0, Y: 1.0}))
        assert forward.objective_value == pytest.approx(backward.objective_value, abs=1e-9)

    def test_unknown_backend(self, program):
        with pytest.raises(LpError):
            solve(program, backend="gurobi")

    def test_empty_program(self):
        sol = solve(assemble([]))
        assert sol.ok and sol.objective_value == 0.0

    @given(
        coeffs=st.lists(st.integers(min_value=-3, max_value=3), min_size=9, max_size=9),
        rhs=st.lists(st.integers(min_value=0, max_value=5), min_size=3, max_size=3),
        cost=st.lists(st.integers(min_value=-3, max_value=3), min_size=3, max_size=3),
    )
    @settings(max_examples=40, deadline=None, phases=[Phase.generate, Phase.shrink])
    def test_backends_agree(self, coeffs, rhs, cost):
        cols = [VarRef("r", "q", (i,)) for i in range(3)]
        rows = RobustRowSet(tag="random")
        for var in cols:
            rows.declare(var, (-5.0, 5.0))
        A = np.reshape(coeffs, (3, 3))
        for i in range(3):
            rows.add(le({cols[j]: float(A[i, j]) for j in range(3)}, float(rhs[i])))
        lp = assemble([rows], objective={cols[j]: float(cost[j]) for j in range(3)})
        highs = solve(lp, backend="highs")
        dense = solve(lp, backend="simplex")
        # x = 0 is feasible and the box keeps the program bounded
        assert highs.ok and dense.ok
        assert dense.objective_value == pytest.approx(highs.objective_value, abs=1e-6)
        assert check_solution(lp, dense.values) <= 1e-7


# ==================== Export ====================

class TestExport:

    def test_lp_format(self):
        rows = RobustRowSet(tag="export")
        rows.declare(X, NONNEG)
        rows.declare(Y, FREE)
        rows.add(le({X: 1.0, Y: -2.0}, 4.0))
        text = to_lp_format(assemble([rows], objective={X: 1.0}))
        assert text.startswith("\\ FlexPlanner export\nMaximize\n")
        assert "Subject To" in text
        assert " r0: + 1 q_0_1 - 2 q_0_2 <= 4" in text
        assert " q_0_2 free" in text
        assert " 0 <= q_0_1 <= +inf" in text
        assert text.endswith("End\n")

    def test_canonical_names_number_aux_columns(self):
        names = canonical_names([aux("x", 5), X, aux("y"), aux("x", 5)])
        assert names[aux("x", 5)] == "aux[0]"
        assert names[aux("y")] == "aux[1]"
        assert names[X] == "q[0][1]"

    def test_dump_rows(self):
        rows = RobustRowSet(tag="dump")
        s = rows.declare(aux("s", 1), NONNEG)
        rows.add(le({X: 1.0, s: 1.0}, 2.0))
        assert dump_rows(rows) == "dump: +1*q[0][1] +1*aux[0] <= 2\n"
