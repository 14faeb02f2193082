import math
from itertools import combinations

import numpy as np
import pytest
import scipy.integrate
from hypothesis import HealthCheck, Phase, given, settings, strategies as st

from src.core.errors import GridError, PolicyError, ResourceError
from src.models.policy import (
    AffinePolicy,
    PolicyStructure,
    aggregate,
    make_structure,
    validate,
    zero_policy,
)
from src.models.resource import (
    FreezerSpec,
    freezer_dynamics,
    make_battery,
    make_freezer,
    make_generic,
    make_turbine,
    scale_resource,
    standalone_capacity,
    state_of_temperature,
    steady_state_power,
    temperature_of_state,
)
from src.models.timegrid import TIMESCALES, breakpoint_times, build_grid, index_map, interval_bounds, interval_of
from src.utils.dynamics_helpers import propagate, segment_weights


# ==================== Time grid ====================

class TestTimeGrid:
    """Timescale chain, counts and index maps."""

    def test_reproduction_counts(self, day_grid):
        assert day_grid.N_S == 288
        assert day_grid.N_C == 8640
        assert day_grid.N_ID == 96
        assert day_grid.N_DA == 24
        assert day_grid.N_SFR == 1
        assert day_grid.steps_per_system == 30
        assert day_grid.days == 1

    def test_omitted_scales_default(self, hour_grid):
        assert hour_grid.T_SFR == 3600
        assert hour_grid.T_ID == 300
        assert hour_grid.T_DA == 300
        assert hour_grid.lead_DA == 0 and hour_grid.lead_ID == 0

    @pytest.mark.parametrize("fine,coarse,k,expected", [
        ("S", "ID", 4, 2),
        ("S", "ID", 3, 1),
        ("C", "S", 31, 2),
        ("C", "S", 30, 1),
        ("S", "H", 288, 1),
    ])
    def test_index_map_examples(self, day_grid, fine, coarse, k, expected):
        assert index_map(day_grid, fine, coarse, k) == expected

    def test_index_map_rejects_out_of_range(self, day_grid):
        with pytest.raises(GridError):
            index_map(day_grid, "S", "ID", 0)
        with pytest.raises(GridError):
            index_map(day_grid, "S", "ID", 289)
        with pytest.raises(GridError):
            index_map(day_grid, "ID", "S", 1)

    def test_non_divisible_control_step(self):
        with pytest.raises(GridError) as exc:
            build_grid({"H": 3600, "S": 300, "C": 7})
        assert "T_C=7" in exc.value.detail

    def test_control_must_be_shorter_than_system(self):
        with pytest.raises(GridError):
            build_grid({"H": 300, "SFR": 300, "DA": 300, "ID": 300, "S": 300, "C": 300})

    def test_rejects_non_positive_and_missing(self):
        with pytest.raises(GridError):
            build_grid({"H": 0, "S": 300, "C": 10})
        with pytest.raises(GridError) as exc:
            build_grid({"H": 3600, "S": 300})
        assert "T_C" in exc.value.detail

    def test_rejects_market_shorter_than_system(self):
        with pytest.raises(GridError):
            build_grid({"H": 3600, "ID": 150, "S": 300, "C": 10})

    def test_interval_helpers(self, hour_grid):
        assert interval_bounds(hour_grid, "S", 2) == (300, 600)
        assert interval_of(hour_grid, "S", 0) == 1
        assert interval_of(hour_grid, "S", 300) == 2
        assert interval_of(hour_grid, "S", 3600) == 12
        times = breakpoint_times(hour_grid)
        assert len(times) == 13 and times[-1] == 3600
        with pytest.raises(GridError):
            interval_of(hour_grid, "S", 3601)

    @given(k=st.integers(min_value=1, max_value=8640))
    @settings(max_examples=100, phases=[Phase.generate, Phase.shrink],
              suppress_health_check=[HealthCheck.function_scoped_fixture])
    def test_index_map_contains_fine_interval(self, day_grid, k):
        m = index_map(day_grid, "C", "S", k)
        fine_lo, fine_hi = interval_bounds(day_grid, "C", k)
        coarse_lo, coarse_hi = interval_bounds(day_grid, "S", m)
        assert coarse_lo <= fine_lo and fine_hi <= coarse_hi

    @pytest.mark.parametrize("grid_name", ["day_grid", "hour_grid", "tiny_grid"])
    def test_index_map_composes(self, request, grid_name):
        grid = request.getfixturevalue(grid_name)
        # TIMESCALES runs long to short, so each reversed triple is fine, mid, coarse
        for fine, mid, coarse in combinations(TIMESCALES[::-1], 3):
            for k in range(1, grid.count(fine) + 1):
                via_mid = index_map(grid, mid, coarse, index_map(grid, fine, mid, k))
                assert via_mid == index_map(grid, fine, coarse, k), (fine, mid, coarse, k)


# ==================== Resources ====================

class TestResources:
    """Parameter sets, standalone capacities and the freezer model."""

    @pytest.mark.parametrize("p_bar,x_bar,expected", [
        (17.2, 100.0, 2.0833),
        (86.0, 500.0, 10.4167),
        (50.0, 210.0, 4.375),
        (100.0, 420.0, 8.75),
        (14.0, 27.0, 0.5625),
        (70.0, 135.0, 2.8125),
    ])
    def test_battery_standalone(self, day_grid, p_bar, x_bar, expected):
        battery = make_battery(p_bar, x_bar, x_bar / 2.0, day_grid)
        assert standalone_capacity(battery, day_grid) == pytest.approx(expected, abs=1e-4)

    def test_power_bound_battery(self, day_grid):
        battery = make_battery(1.0, 1000.0, 500.0, day_grid)
        assert standalone_capacity(battery, day_grid) == pytest.approx(1.0)

    def test_turbine_standalone_is_ramp_bound(self, day_grid):
        turbine = make_turbine(0.0, 250_000.0, 4_500.0, day_grid)
        assert turbine.r_max[0] == pytest.approx(75.0)
        assert not turbine.has_state
        assert standalone_capacity(turbine, day_grid) == pytest.approx(375.0)

    def test_delayed_freezer_has_no_capacity(self, day_grid):
        freezer = make_freezer(FreezerSpec(), day_grid)
        assert freezer.blocks_regulation(day_grid)
        assert standalone_capacity(freezer, day_grid) == 0.0

    def test_freezer_dynamics(self):
        a, b, u = freezer_dynamics(FreezerSpec())
        assert a == pytest.approx(math.log(32.0 / 34.0) / 36000.0)
        assert a == pytest.approx(-1.684e-6, rel=1e-3)
        assert b == pytest.approx(5.4562, abs=1e-3)
        assert u == pytest.approx(-32.0)

    def test_freezer_steady_state(self, day_grid):
        freezer = make_freezer(FreezerSpec(), day_grid)
        assert steady_state_power(freezer, 900.0) == pytest.approx(180.055, abs=1e-2)
        assert steady_state_power(freezer, 900.0) == pytest.approx(33.0 * freezer.b)

    def test_temperature_mapping(self):
        spec = FreezerSpec()
        assert temperature_of_state(spec, 1800.0) == pytest.approx(-29.0)
        assert temperature_of_state(spec, 0.0) == pytest.approx(-27.0)
        assert state_of_temperature(spec, -28.0) == pytest.approx(900.0)

    def test_freezer_spec_rejects_inverted_temperatures(self):
        with pytest.raises(ResourceError):
            FreezerSpec(theta_in_min=-25.0, theta_in_max=-29.0)

    def test_invalid_parameters(self, hour_grid):
        with pytest.raises(ResourceError):
            make_battery(-1.0, 10.0, 5.0, hour_grid)
        with pytest.raises(ResourceError):
            make_battery(1.0, 10.0, 11.0, hour_grid)
        with pytest.raises(ResourceError):
            make_turbine(10.0, 5.0, 1.0, hour_grid)
        with pytest.raises(ResourceError):
            make_generic(hour_grid, p_min=5.0, p_max=1.0)
        with pytest.raises(ResourceError):
            make_generic(hour_grid, p_min=0.0, p_max=1.0, a=1e-3)
        with pytest.raises(ResourceError):
            make_generic(hour_grid, p_min=[0.0, 1.0], p_max=1.0)

    def test_generic_broadcasts_and_disables_limits(self, hour_grid):
        phi = make_generic(hour_grid, p_min=-1.0, p_max=2.0, label="g")
        assert phi.n == 12
        assert np.all(phi.p_max == 2.0)
        assert not phi.has_ramp and not phi.has_state

    def test_scaling_is_joint(self, day_grid):
        battery = make_battery(17.2, 100.0, 50.0, day_grid)
        scaled = scale_resource(battery, 5.0)
        assert scaled.p_max[0] == pytest.approx(86.0)
        assert scaled.x_max[0] == pytest.approx(500.0)
        assert standalone_capacity(scaled, day_grid) == pytest.approx(5.0 * standalone_capacity(battery, day_grid))
        with pytest.raises(ResourceError):
            scale_resource(battery, 0.0)


# ==================== Segment dynamics ====================

class TestSegmentWeights:

    def test_lossless(self):
        w = segment_weights(0.0, 300.0)
        assert w.rho == 1.0
        assert w.alpha == pytest.approx(300.0)
        assert w.beta_start == pytest.approx(150.0)
        assert w.beta_end == pytest.approx(150.0)

    @pytest.mark.parametrize("a", [-1e-3, -1.684e-6, -1e-9])
    def test_against_quadrature(self, a):
        length = 300.0
        w = segment_weights(a, length)
        alpha, _ = scipy.integrate.quad(lambda tau: math.exp(a * (length - tau)), 0.0, length)
        i2, _ = scipy.integrate.quad(lambda tau: math.exp(a * (length - tau)) * tau, 0.0, length)
        assert w.rho == pytest.approx(math.exp(a * length))
        assert w.alpha == pytest.approx(alpha, rel=1e-9)
        assert w.i2 == pytest.approx(i2, rel=1e-9)

    def test_propagate_battery(self):
        assert propagate(50.0, 0.0, 3600.0, 10.0) == pytest.approx(60.0)
        # Linear ramp 0 -> 10 kW over one hour stores 5 kWh
        assert propagate(0.0, 0.0, 3600.0, 0.0, 10.0 / 3600.0) == pytest.approx(5.0)


# ==================== Policy structure ====================

class TestPolicyStructure:
    """Causality, delay and band masks."""

    def test_single_lag_with_delay(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=1, delay=300)
        assert structure.delay_steps == 1
        expected = [(n + 2, n - 1) for n in range(1, 11)]
        assert [tuple(e) for e in np.argwhere(structure.mask)] == expected

    def test_zero_bandwidth_is_single_lag(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=0)
        expected = [(n + 1, n - 1) for n in range(1, 12)]
        assert [tuple(e) for e in np.argwhere(structure.mask)] == expected

    def test_bandwidth_one_allows_two_lags(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=1)
        for k, col in np.argwhere(structure.mask):
            assert k - (col + 1) in (1, 2)
        assert structure.allowed(2, 1) and structure.allowed(3, 1)
        assert not structure.allowed(4, 1)
        assert not structure.allowed(1, 1)

    def test_long_delay_masks_everything(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=0, delay=1e9)
        assert not structure.mask.any()
        assert all(structure.last_row(n) is None for n in range(1, 13))
        assert structure.entries() == []

    def test_rejects_negative_arguments(self, hour_grid):
        with pytest.raises(PolicyError):
            make_structure(hour_grid, bandwidth=-1)
        with pytest.raises(PolicyError):
            make_structure(hour_grid, bandwidth=1, delay=-1.0)

    def test_delay_rounds_up(self, day_grid):
        assert make_structure(day_grid, 4, delay=1).delay_steps == 1
        assert make_structure(day_grid, 4, delay=301).delay_steps == 2

    @given(bandwidth=st.integers(min_value=0, max_value=5), delay=st.integers(min_value=0, max_value=4))
    @settings(max_examples=60, phases=[Phase.generate, Phase.shrink])
    def test_mask_consistency_and_monotonicity(self, bandwidth, delay):
        n = 12
        structure = PolicyStructure(n=n, bandwidth=bandwidth, delay_steps=delay)
        mask = structure.mask
        for k in range(n + 1):
            assert list(structure.columns(k)) == [c for c in range(1, n + 1) if structure.allowed(k, c)]
        for col in range(1, n + 1):
            rows = np.flatnonzero(mask[:, col - 1])
            assert structure.last_row(col) == (int(rows.max()) if rows.size else None)
            # Causality: breakpoint k only sees w̃_n with n <= k - 1
            assert all(k >= col + 1 for k in rows)
        wider = PolicyStructure(n=n, bandwidth=bandwidth + 1, delay_steps=delay).mask
        later = PolicyStructure(n=n, bandwidth=bandwidth, delay_steps=delay + 1).mask
        assert np.all(wider[mask])
        assert not np.any(later & ~mask)


# ==================== Policies ====================

class TestPolicies:

    def test_breakpoints(self):
        Q = np.zeros((4, 3))
        Q[2, 0] = 2.0
        policy = AffinePolicy(Q=Q, q=[1.0, 1.0, 1.0, 1.0], gamma=[1.0, 1.0, 1.0])
        assert np.allclose(policy.breakpoints([0.5, 0.0, 0.0]), [1.0, 1.0, 2.0, 1.0])
        with pytest.raises(PolicyError):
            policy.breakpoints([0.5, 0.0])

    def test_shape_checks(self):
        with pytest.raises(PolicyError):
            AffinePolicy(Q=np.zeros((3, 3)), q=np.zeros(3))
        with pytest.raises(PolicyError):
            AffinePolicy(Q=np.zeros((4, 3)), q=np.zeros(3))
        with pytest.raises(PolicyError):
            AffinePolicy(Q=np.zeros((4, 3)), q=np.zeros(4), gamma=np.zeros(4))

    def test_aggregate(self):
        a = zero_policy(3)
        b = AffinePolicy(Q=np.ones((4, 3)), q=np.ones(4), gamma=np.full(3, 2.0))
        c = AffinePolicy(Q=np.ones((4, 3)), q=np.ones(4))
        total = aggregate([a, b, c])
        assert np.all(total.Q == 2.0)
        assert np.all(total.q == 2.0)
        assert np.all(total.gamma == 2.0)
        with pytest.raises(PolicyError):
            aggregate([])
        with pytest.raises(PolicyError):
            aggregate([zero_policy(3), zero_policy(4)])

    @pytest.mark.parametrize("grid_name", ["day_grid", "hour_grid", "tiny_grid"])
    def test_aggregate_algebra(self, request, grid_name):
        n = request.getfixturevalue(grid_name).N_S
        rng = np.random.default_rng(n)
        a, b, c = (
            AffinePolicy(Q=rng.normal(size=(n + 1, n)), q=rng.normal(size=n + 1), gamma=rng.uniform(0.0, 5.0, n))
            for _ in range(3)
        )
        same = aggregate([a, zero_policy(n)])
        assert np.array_equal(same.Q, a.Q) and np.array_equal(same.q, a.q) and np.array_equal(same.gamma, a.gamma)
        left = aggregate([aggregate([a, b]), c])
        right = aggregate([a, aggregate([b, c])])
        for attr in ("Q", "q", "gamma"):
            assert np.allclose(getattr(left, attr), getattr(right, attr))
            assert np.allclose(getattr(left, attr), getattr(aggregate([a, b, c]), attr))

    def test_validate_compliant(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=1)
        policy = zero_policy(12)
        assert validate(policy, structure) == []

    def test_validate_reports_violations(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=1)
        Q = np.zeros((13, 12))
        Q[0, 0] = 1.0
        Q[2, 0] = 1.0  # allowed
        gamma = np.ones(12)
        gamma[3] = -1.0
        report = validate(AffinePolicy(Q=Q, q=np.zeros(13), gamma=gamma), structure)
        kinds = {v.kind for v in report}
        assert kinds == {"mask", "gamma_negative", "gamma_time_variant"}
        mask_violation = next(v for v in report if v.kind == "mask")
        assert mask_violation.index == (1, 1)
        negative = next(v for v in report if v.kind == "gamma_negative")
        assert negative.index == (4,)

    def test_validate_time_variant_structure(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=1, time_invariant=False)
        policy = AffinePolicy(Q=np.zeros((13, 12)), q=np.zeros(13), gamma=np.arange(12.0))
        assert validate(policy, structure) == []

    def test_validate_dimension(self, hour_grid):
        structure = make_structure(hour_grid, bandwidth=1)
        report = validate(zero_policy(4), structure)
        assert [v.kind for v in report] == ["dimension"]
