"""
Built-in reproduction scenarios.

Parameters are hard-coded from the published battery-freezer and
battery-turbine aggregation studies so that reproduction runs cannot drift.
"""

from dataclasses import dataclass

from src.api.bidding import Scenario
from src.core.settings import DEFAULT_BANDWIDTH, SECONDS_PER_DAY
from src.models.policy import make_structure
from src.models.resource import FreezerSpec, make_battery, make_freezer, make_turbine
from src.models.timegrid import TimeGrid, build_grid

CASES = ("battery-freezer", "battery-turbine", "sweep")


@dataclass(frozen=True)
class TableRow:
    battery: str
    count: int
    p_bar_kW: float
    x_bar_kWh: float
    gamma_B_kW: float
    gamma_agg_kW: float
    sigma: float


# Battery-freezer aggregation, one day at 5 min / 10 s resolution
BATTERY_FREEZER_ROWS = (
    TableRow("Model-S", 1, 17.2, 100.0, 2.08, 9.61, 3.61),
    TableRow("Model-S", 5, 86.0, 500.0, 10.42, 48.04, 3.61),
    TableRow("Powerpack", 1, 50.0, 210.0, 4.38, 27.09, 5.19),
    TableRow("Powerpack", 2, 100.0, 420.0, 8.75, 49.47, 4.65),
    TableRow("Powerwall", 2, 14.0, 27.0, 0.56, 7.25, 11.90),
    TableRow("Powerwall", 10, 70.0, 135.0, 2.81, 36.26, 11.90),
)

# Battery-steam turbine aggregation; storage published in MWh
BATTERY_TURBINE_ROWS = (
    TableRow("Model-S", 10, 172.0, 1000.0, 20.83, 468.70, 0.18),
    TableRow("Model-S", 50, 860.0, 5000.0, 104.17, 843.50, 0.76),
    TableRow("Model-S", 100, 1720.0, 10000.0, 208.33, 1312.00, 1.25),
    TableRow("Powerpack", 5, 250.0, 1050.0, 21.88, 506.84, 0.28),
    TableRow("Powerpack", 10, 500.0, 2100.0, 43.75, 638.68, 0.53),
    TableRow("Powerpack", 20, 1000.0, 4200.0, 87.50, 902.35, 0.95),
    TableRow("Powerwall", 50, 350.0, 675.0, 14.06, 551.00, 0.42),
    TableRow("Powerwall", 100, 700.0, 1350.0, 28.13, 726.99, 0.80),
)

# Siemens SST-3000 class turbine: 0..250 MW, ±4.5 MW/min, no delay, no state limits
TURBINE_P_MIN_KW = 0.0
TURBINE_P_MAX_KW = 250_000.0
TURBINE_RAMP_KW_PER_MIN = 4_500.0

# Freezer warehouse: FreezerSpec defaults (0..300 kW, ±100 kW/min, 1.8 MWh, -29..-27 °C, 5 °C outside, 10 h)
FREEZER = FreezerSpec()


def reproduction_grid() -> TimeGrid:
    """One day; reserve tender over the whole horizon, hourly DA, quarter-hour ID, 5 min system, 10 s control."""
    return build_grid(
        {"H": SECONDS_PER_DAY, "SFR": SECONDS_PER_DAY, "DA": 3600, "ID": 900, "S": 300, "C": 10},
        {"DA": 12 * 3600, "ID": 3600},
    )


def battery_freezer(row: TableRow = BATTERY_FREEZER_ROWS[0], grid: TimeGrid | None = None,
                    bandwidth: int = DEFAULT_BANDWIDTH, with_freezer: bool = True,
                    with_battery: bool = True) -> Scenario:
    grid = grid or reproduction_grid()
    resources, structures = [], []
    if with_battery:
        resources.append(make_battery(row.p_bar_kW, row.x_bar_kWh, row.x_bar_kWh / 2.0, grid, label="battery"))
        structures.append(make_structure(grid, bandwidth))
    if with_freezer:
        resources.append(make_freezer(FREEZER, grid, label="freezer"))
        structures.append(make_structure(grid, bandwidth, delay=FREEZER.delay))
    return Scenario(grid=grid, resources=resources, structures=structures,
                    name=f"battery-freezer:{row.battery}x{row.count}")


def battery_turbine(row: TableRow = BATTERY_TURBINE_ROWS[0], grid: TimeGrid | None = None,
                    bandwidth: int = DEFAULT_BANDWIDTH, with_turbine: bool = True,
                    with_battery: bool = True) -> Scenario:
    grid = grid or reproduction_grid()
    resources, structures = [], []
    if with_battery:
        resources.append(make_battery(row.p_bar_kW, row.x_bar_kWh, row.x_bar_kWh / 2.0, grid, label="battery"))
        structures.append(make_structure(grid, bandwidth))
    if with_turbine:
        resources.append(make_turbine(TURBINE_P_MIN_KW, TURBINE_P_MAX_KW, TURBINE_RAMP_KW_PER_MIN, grid,
                                      label="turbine"))
        structures.append(make_structure(grid, bandwidth))
    return Scenario(grid=grid, resources=resources, structures=structures,
                    name=f"battery-turbine:{row.battery}x{row.count}")


# Battery grid of the synergy-factor map
SWEEP_P_BAR_KW = (10.0, 25.0, 50.0, 75.0, 100.0)
SWEEP_X_BAR_KWH = (25.0, 100.0, 200.0, 350.0, 500.0)
