"""Test the ConstellationDesigner class."""

import csv
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
import yaml

from cisphase import ConstellationDesigner, parse_scenario
from cisphase.errors import ScenarioError
from cisphase.phasing import OptimizeResult
from cisphase.tasking import ControlTensor, ObjectiveKind

OBSERVERS = [{"orbit": "L1-a", "phase": 0.3}, {"orbit": "DRO-a", "phase": 0.7}]
TARGETS = [{"orbit": "L2-a", "phase": 0.0}, {"orbit": "L2-b", "phase": 0.5}]
QUICK_SOLVER = {"max_iter": 15}


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def _only(out_dir: Path, name: str) -> Path:
    matches = sorted(out_dir.glob(f"*-{name}"))
    assert len(matches) == 1, matches
    return matches[0]


class TestConstellationDesigner:
    """Tests for configuration, catalog lookup and every study command."""

    def test_init(self):
        """User config beats scenario settings, which beat the defaults."""
        scenario = parse_scenario("observers: [L1-a]\ntargets: [L2-a]\nsolver: {gap_tol: 1.0e-4, starts: 3}\n")
        designer = ConstellationDesigner(scenario, config={"STARTS": 5})
        assert designer.config["GAP_TOL"] == 1e-4
        assert designer.config["STARTS"] == 5
        assert designer.config["REL_TOL"] == 1e-13
        assert designer.config["ABS_TOL"] == 1e-14
        assert designer.search_settings.starts == 5

    def test_catalog_precedence(self, monkeypatch, tmp_path):
        """Explicit path, then the scenario, then CISPHASE_CATALOG."""
        monkeypatch.setenv("CISPHASE_CATALOG", "/env/orbits.csv")
        bare = parse_scenario("observers: [L1-a]\ntargets: [L2-a]\n")
        assert ConstellationDesigner(bare).catalog_path() == Path("/env/orbits.csv")
        assert ConstellationDesigner(bare, catalog="x.csv").catalog_path() == Path("x.csv")
        with_catalog = parse_scenario("catalog: cat.csv\nobservers: [L1-a]\ntargets: [L2-a]\n", tmp_path)
        assert ConstellationDesigner(with_catalog).catalog_path() == tmp_path / "cat.csv"
        monkeypatch.delenv("CISPHASE_CATALOG")
        with pytest.raises(ScenarioError):
            ConstellationDesigner(bare).catalog_path()

    def test_missing_catalog_file(self, tmp_path):
        """An unreadable catalog is a scenario error."""
        scenario = parse_scenario("observers: [L1-a]\ntargets: [L2-a]\n")
        designer = ConstellationDesigner(scenario, catalog=tmp_path / "nope.csv")
        with pytest.raises(ScenarioError):
            designer.orbits

    def test_propagate(self, scenario_file, l1_orbit, tmp_path):
        """L + 1 rows; the first is the catalog state at phase 0."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS, steps=8))
        report = designer.propagate("L1-a", 0.0, tmp_path / "out")
        rows = _read_csv(_only(tmp_path / "out", "propagate.csv"))
        assert rows[0] == ["t", "x", "y", "z", "vx", "vy", "vz"]
        assert len(rows) == 1 + 9
        assert [float(v) for v in rows[1][1:]] == list(l1_orbit.initial_state)
        assert report.result["rows"] == 9
        assert report.exit_code == 0
        run = yaml.safe_load(_only(tmp_path / "out", "run.yaml").read_text())
        assert run["scenario_digest"] == designer.scenario.digest

    def test_propagate_unknown_orbit(self, scenario_file, tmp_path):
        """Unknown ids raise."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        with pytest.raises(ScenarioError):
            designer.propagate("HALO-1", 0.0, tmp_path)

    def test_outputs_carry_digest(self, scenario_file, tmp_path):
        """Every artifact name starts with the scenario's short digest."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        report = designer.scan(0, 3, "both", tmp_path)
        for path in report.outputs.values():
            assert Path(path).name.startswith(designer.scenario.short_digest + "-")
        header = _read_csv(_only(tmp_path, "scan.csv"))[0]
        assert header == ["phase", "f_opt", "f_myop", "log_f_opt", "skipped"]
        assert report.result["rog"] >= 0

    def test_scan_with_close_approach_is_incomplete(self, scenario_file, tmp_path):
        """A skipped phase keeps the run going but sets the incomplete exit code."""
        path = scenario_file([{"orbit": "L1-a"}], [{"orbit": "L1-a", "phase": 0.0}, {"orbit": "L2-a"}])
        report = ConstellationDesigner.from_file(path).scan(0, 4, "optimal", tmp_path)
        assert report.skipped == 1
        assert report.exit_code == 2
        rows = _read_csv(_only(tmp_path, "scan.csv"))
        assert rows[1] == ["0", "", "", "1"]

    @patch("cisphase.designer.greedy_search")
    def test_optimize_flags_heuristic(self, mock_greedy, scenario_file, tmp_path):
        """A heuristic result is reported as a warning; the schedule is written."""
        control = ControlTensor.from_assignments((2, 2, 8), [(0, 0, 1), (1, 1, 0)])
        mock_greedy.return_value = OptimizeResult(
            x_star=np.array([0.25, 0.75]), objective=np.e, log_objective=1.0, control=control,
            wall_time=0.5, evaluations=7, method="greedy", kind=ObjectiveKind.MAXMIN, heuristic=True,
        )
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        report = designer.optimize("greedy", "maxmin", out_dir=tmp_path)

        mock_greedy.assert_called_once()
        assert mock_greedy.call_args.args[1] is ObjectiveKind.MAXMIN
        assert list(mock_greedy.call_args.args[2]) == [0.3, 0.7]
        assert report.warnings
        assert report.result["budget"] == [0.5, 0.5]
        summary = _read_csv(_only(tmp_path, "optimize.csv"))
        assert summary[0][:2] == ["x*", "log(f)"]
        assert "Solve Time (sec)" not in summary[0]
        assert summary[1][0] == "[0.25 0.75]"
        assert summary[1][1] == "1"
        assert report.result["wall_time"] == 0.5
        assert _read_csv(_only(tmp_path, "schedule.csv"))[1:] == [["0", "0", "1"], ["1", "1", "0"]]

    def test_optimize_rejects_unknown_method(self, scenario_file):
        """Only greedy and exhaustive exist."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        with pytest.raises(ValueError):
            designer.optimize("annealing")

    def test_optimize_then_validate(self, scenario_file, tmp_path):
        """The optimal schedule passes the covariance identity check at the optimal phases."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS, solver=QUICK_SOLVER))
        report = designer.optimize("greedy", "max", out_dir=tmp_path)
        assert report.exit_code == 0
        x_star = report.result["x_star"]
        assert report.result["objective"] > 0

        check = designer.validate_ekf(report.outputs["schedule"], tmp_path, phases=x_star)
        assert check.result["identity_ok"] is True
        assert check.result["identity_residual"] < 1e-6
        beliefs = _read_csv(_only(tmp_path, "validate-ekf.csv"))
        assert beliefs[0] == ["step", "target", "trace_P", "trace_Pinv", "det_P"]
        assert len(beliefs) == 1 + 2 * 9

    def test_validate_empty_schedule(self, scenario_file, tmp_path):
        """An empty schedule skips the identity check with a warning."""
        schedule = tmp_path / "empty.csv"
        schedule.write_text("step,observer,target\n")
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        report = designer.validate_ekf(schedule, tmp_path)
        assert report.result["identity_residual"] is None
        assert any("empty schedule" in w for w in report.warnings)

    def test_validate_phase_count(self, scenario_file, tmp_path):
        """One phase per observer."""
        schedule = tmp_path / "empty.csv"
        schedule.write_text("step,observer,target\n")
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        with pytest.raises(ScenarioError):
            designer.validate_ekf(schedule, tmp_path, phases=[0.1])

    def test_budget(self, scenario_file, tmp_path):
        """Shares per phase and target, summing to one per phase."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        designer.budget(2, "max", observer=1, out_dir=tmp_path)
        rows = _read_csv(_only(tmp_path, "budget.csv"))[1:]
        assert len(rows) == 4
        for phase in ("0", "0.5"):
            assert sum(float(r[2]) for r in rows if r[0] == phase) == pytest.approx(1.0)

    def test_contour_and_separability(self, scenario_file, tmp_path):
        """Grid and sweep artifacts have one row per evaluated point."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS))
        report = designer.contour((0, 1), 3, tmp_path)
        assert len(_read_csv(_only(tmp_path, "contour.csv"))) == 1 + 9
        assert len(report.result["best"]) == 2
        designer.separability(0, 1, [0.0, 0.5], 3, tmp_path)
        assert len(_read_csv(_only(tmp_path, "separability.csv"))) == 1 + 6
        argmax = _read_csv(_only(tmp_path, "separability-argmax.csv"))
        assert argmax[0] == ["fixed_phase", "argmax_phase"]
        assert argmax[1][1] == argmax[2][1]

    def test_pdf_report(self, scenario_file, tmp_path):
        """PDF_REPORT adds a rendered copy of the run report."""
        designer = ConstellationDesigner.from_file(scenario_file(OBSERVERS, TARGETS), config={"PDF_REPORT": True})
        report = designer.propagate("DRO-a", 0.5, tmp_path)
        assert Path(report.outputs["pdf"]).read_bytes().startswith(b"%PDF")
