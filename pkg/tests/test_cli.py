import json

import pandas as pd
import pytest

from main import main
from src.api.commands import result_problems
from src.core.errors import EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION, EXIT_VIOLATION, ScenarioError
from src.utils.document_helpers import load_result_document, parse_scenario

HOUR_GRID = {"horizon_s": 3600, "system_s": 300, "control_s": 10, "lead_da_s": 0, "lead_id_s": 0}


def scenario_data(out_dir, **overrides):
    data = {
        "name": "hour",
        "grid": dict(HOUR_GRID),
        "resources": [{"type": "battery", "label": "battery", "p_max_kW": 1.0, "x_max_kWh": 100.0}],
        "outputs": {"dir": str(out_dir)},
    }
    data.update(overrides)
    return data


@pytest.fixture
def scenario_path(tmp_path):
    path = tmp_path / "hour.json"
    path.write_text(json.dumps(scenario_data(tmp_path)))
    return path


@pytest.fixture
def result_path(tmp_path, scenario_path):
    assert main(["solve", str(scenario_path)]) == EXIT_OK
    return tmp_path / "hour.result.json"


# ==================== solve ====================

class TestSolve:

    def test_writes_result_document(self, result_path):
        assert result_path.is_file()
        document = json.loads(result_path.read_text())
        assert document["objective_value"] == pytest.approx(1.0, rel=1e-6)
        assert document["standalone_kW"] == [pytest.approx(1.0)]
        assert len(document["policies"][0]["q"]) == 13
        assert len(document["policies"][0]["Q"]) == 13
        assert document["scenario"]["name"] == "hour"

    def test_missing_file(self, tmp_path):
        assert main(["solve", str(tmp_path / "absent.json")]) == EXIT_VALIDATION

    def test_invalid_parameter(self, tmp_path, capsys):
        data = scenario_data(tmp_path)
        data["resources"][0]["p_max_kW"] = -1.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        assert main(["solve", str(path)]) == EXIT_VALIDATION
        assert "/resources/0/p_max_kW" in capsys.readouterr().out

    def test_problem_pointer(self, tmp_path):
        data = scenario_data(tmp_path)
        data["resources"][0]["p_max_kW"] = 0.0
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(data)
        assert exc.value.problems[0].startswith("/resources/0/p_max_kW:")

    def test_mode_conflict(self, tmp_path):
        data = scenario_data(tmp_path, mode={"market": "markets-frozen", "objective": "profit"}, prices={})
        path = tmp_path / "conflict.json"
        path.write_text(json.dumps(data))
        assert main(["solve", str(path)]) == EXIT_VALIDATION

    def test_infeasible_scenario(self, tmp_path):
        overfull = {
            "type": "generic", "label": "overfull", "p_min_kW": 5.0, "p_max_kW": 10.0,
            "x_min_kWh": 0.0, "x_max_kWh": 1.0, "x0_min_kWh": 0.5, "x0_max_kWh": 0.5,
        }
        data = scenario_data(tmp_path, resources=[overfull], structures=[{"bandwidth": 1}])
        path = tmp_path / "overfull.json"
        path.write_text(json.dumps(data))
        assert main(["solve", str(path)]) == EXIT_INFEASIBLE
        assert not (tmp_path / "hour.result.json").exists()

    def test_grid_error(self, tmp_path):
        data = scenario_data(tmp_path)
        data["grid"]["control_s"] = 7
        path = tmp_path / "grid.json"
        path.write_text(json.dumps(data))
        assert main(["solve", str(path)]) == EXIT_VALIDATION

    def test_no_command(self):
        assert main([]) == EXIT_VALIDATION


class TestResultProblems:

    def test_written_bid_is_clean(self, tmp_path, result_path):
        assert result_problems(load_result_document(result_path), tmp_path) == []

    def test_unbalanced_market_is_reported(self, tmp_path, result_path):
        document = load_result_document(result_path)
        document.market.da.q[3] += 0.01
        problems = result_problems(document, tmp_path)
        assert len(problems) == 1
        assert problems[0].startswith("balance residual 1.000e-02")

    def test_solve_warns_on_written_problems(self, tmp_path, scenario_path, monkeypatch, capsys):
        monkeypatch.setattr("src.api.commands.result_problems", lambda doc, base_dir: ["balance residual 1e-06 kW"])
        assert main(["solve", str(scenario_path)]) == EXIT_OK
        assert "⚠ balance residual 1e-06 kW" in capsys.readouterr().out


# ==================== simulate ====================

class TestSimulate:

    def test_compliant_bid(self, tmp_path, result_path):
        assert main(["simulate", str(result_path), "--signal", "constant:1"]) == EXIT_OK
        trace = pd.read_csv(tmp_path / "hour.sim.trace.csv")
        assert len(trace) == 361
        assert "battery_x_kWh" in trace.columns
        summary = json.loads((tmp_path / "hour.sim.json").read_text())
        assert summary["violations"] == []

    def test_edited_bid_violates(self, tmp_path, result_path):
        document = json.loads(result_path.read_text())
        document["policies"][0]["q"] = [50.0] * 13
        edited = tmp_path / "edited.result.json"
        edited.write_text(json.dumps(document))
        assert main(["simulate", str(edited), "--signal", "constant:0"]) == EXIT_VIOLATION
        summary = json.loads((tmp_path / "hour.sim.json").read_text())
        assert summary["violations"]

    def test_no_activation_keeps_state(self, tmp_path, result_path):
        assert main(["simulate", str(result_path), "--signal", "constant:0"]) == EXIT_OK
        trace = pd.read_csv(tmp_path / "hour.sim.trace.csv")
        assert trace["battery_x_kWh"].to_numpy() == pytest.approx(50.0, abs=1e-5)

    def test_inflated_capacity_violates(self, tmp_path, result_path):
        document = json.loads(result_path.read_text())
        document["policies"][0]["gamma_kW"] = [1.1 * g for g in document["policies"][0]["gamma_kW"]]
        inflated = tmp_path / "inflated.result.json"
        inflated.write_text(json.dumps(document))
        assert main(["simulate", str(inflated), "--signal", "constant:1"]) == EXIT_VIOLATION

    def test_walk_signal_with_seed(self, result_path):
        assert main(["simulate", str(result_path), "--signal", "walk:0.1", "--seed", "5"]) == EXIT_OK

    def test_bad_signal(self, result_path):
        assert main(["simulate", str(result_path), "--signal", "constant:2"]) == EXIT_VALIDATION

    def test_scenario_signal_is_the_default(self, tmp_path):
        path = tmp_path / "signal.json"
        path.write_text(json.dumps(scenario_data(tmp_path, signal="constant:0.5")))
        assert main(["solve", str(path)]) == EXIT_OK
        assert main(["simulate", str(tmp_path / "hour.result.json")]) == EXIT_OK
        summary = json.loads((tmp_path / "hour.sim.json").read_text())
        assert summary["signal"] == "constant:0.5"

    def test_option_overrides_scenario_signal(self, tmp_path):
        path = tmp_path / "signal.json"
        path.write_text(json.dumps(scenario_data(tmp_path, signal="constant:0.5")))
        assert main(["solve", str(path)]) == EXIT_OK
        assert main(["simulate", str(tmp_path / "hour.result.json"), "--signal", "constant:-1"]) == EXIT_OK
        summary = json.loads((tmp_path / "hour.sim.json").read_text())
        assert summary["signal"] == "constant:-1"

    def test_no_signal_anywhere(self, result_path, capsys):
        assert main(["simulate", str(result_path)]) == EXIT_VALIDATION
        assert "✗ No activation signal" in capsys.readouterr().out


# ==================== sweep ====================

class TestSweep:

    def test_writes_table(self, tmp_path, scenario_path):
        grid = tmp_path / "grid.csv"
        pd.DataFrame({"p_bar_kW": [1.0, 100.0], "x_bar_kWh": [100.0, 10.0]}).to_csv(grid, index=False)
        assert main(["sweep", str(scenario_path), "--grid", str(grid)]) == EXIT_OK
        table = pd.read_csv(tmp_path / "hour.sweep.csv")
        assert len(table) == 2
        assert table["gamma_agg_kW"].tolist() == [pytest.approx(1.0, rel=1e-5), pytest.approx(4.8, rel=1e-5)]

    def test_missing_column(self, tmp_path, scenario_path):
        grid = tmp_path / "grid.csv"
        pd.DataFrame({"p_bar_kW": [1.0]}).to_csv(grid, index=False)
        assert main(["sweep", str(scenario_path), "--grid", str(grid)]) == EXIT_VALIDATION


# ==================== reproduce ====================

@pytest.mark.slow
class TestReproduce:

    def test_battery_freezer_table(self, tmp_path):
        assert main(["reproduce", "battery-freezer", "--strict", "--out", str(tmp_path)]) == EXIT_OK
        table = pd.read_csv(tmp_path / "battery-freezer.csv")
        assert len(table) == 6
        assert {"published_gamma_agg_kW", "dev_gamma_agg_pct", "dev_sigma_pct"} <= set(table.columns)
        assert table["dev_gamma_agg_pct"].abs().max() <= 5.0
        assert table["dev_sigma_pct"].abs().max() <= 5.0


class TestReproduceTolerance:

    @pytest.fixture
    def off_table(self, monkeypatch):
        table = pd.DataFrame({
            "battery": ["model_s"], "count": [1], "gamma_agg_kW": [11.0], "sigma": [1.1],
            "published_gamma_agg_kW": [10.0], "published_sigma": [1.0],
            "dev_gamma_agg_pct": [10.0], "dev_sigma_pct": [10.0],
        })
        monkeypatch.setattr("src.api.commands.reproduce_table", lambda case, workers: table)
        return table

    def test_reports_but_passes_by_default(self, tmp_path, off_table, capsys):
        assert main(["reproduce", "battery-freezer", "--out", str(tmp_path)]) == EXIT_OK
        assert "exceeds 5%" in capsys.readouterr().out
        assert (tmp_path / "battery-freezer.csv").is_file()

    def test_strict_fails(self, tmp_path, off_table):
        assert main(["reproduce", "battery-freezer", "--strict", "--out", str(tmp_path)]) == EXIT_VIOLATION

    def test_strict_within_tolerance(self, tmp_path, off_table):
        args = ["reproduce", "battery-freezer", "--strict", "--tolerance", "12", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
