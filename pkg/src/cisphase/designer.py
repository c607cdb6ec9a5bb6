"""
Main designer class that drives one scenario through the dynamics, tasking and phasing pipeline.
"""

import dataclasses
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from .catalog.orbits import OrbitSpec, index_catalog, load_catalog, sample_trajectory
from .dynamics.propagation import PropagationSettings
from .errors import ScenarioError
from .filtering.ekf import information_identity_residual, run_schedule
from .formatters.report import RunReport, write_run_report_pdf
from .formatters.tables import (
    format_vector,
    read_schedule,
    write_argmax,
    write_belief_history,
    write_budget,
    write_contour,
    write_info_tensor,
    write_result_summary,
    write_schedule,
    write_separability,
    write_starts,
    write_sweep,
    write_trajectory,
)
from .observation.tensor import TaskingEnvironment, build_info_tensor
from .phasing import (
    BilevelObjective,
    SearchSettings,
    argmax_phases,
    budget_sweep,
    contour_grid,
    exhaustive_search,
    greedy_search,
    phase_grid,
    separability_study,
    sweep_phase,
)
from .scenario import Scenario, load_scenario
from .tasking import ObjectiveKind, observation_budget

logger = logging.getLogger(__name__)

# Load environment variables from .env file
load_dotenv()

# Default configuration
DEFAULT_CONFIG = {
    "REL_TOL": 1e-13,
    "ABS_TOL": 1e-14,
    "MAX_STEP": float("inf"),
    "CLOSURE_TOL": 1e-6,  # per-component, one period
    "SIGMA": 1e-5,  # angular noise, radians
    "RHO_FLOOR": 1e-6,
    "CLOSE_APPROACH": "error",
    "GAP_TOL": 1e-9,
    "NODE_LIMIT": 10 ** 6,
    "GRADIENT_STEP": 1e-6,
    "MAX_ITER": 500,
    "GRAD_TOL": 1e-8,
    "F_TOL": 1e-10,
    "STARTS": 1,
    "WORKERS": 1,
    "SEED": 0,
    "DEFAULT_STEPS": 215,
    "PROCESS_NOISE": 0.0,  # scalar q, Q = q I
    "INITIAL_VARIANCE": 1e-6,
    "IDENTITY_TOL": 1e-6,
    "PDF_REPORT": False,
}

METHODS = ("greedy", "exhaustive")


class ConstellationDesigner:
    """
    Runs the studies a scenario file describes and writes their artifacts.
    """

    def __init__(self, scenario: Scenario, config=None, catalog=None, command: Optional[List[str]] = None):
        """
        Args:
            scenario (Scenario): Parsed scenario.
            config (dict, optional): Overrides applied on top of the scenario's settings.
            catalog (str or Path, optional): Catalog CSV; beats the scenario and CISPHASE_CATALOG.
            command (list, optional): Command echo recorded in run reports.
        """
        self.scenario = scenario
        self.config = DEFAULT_CONFIG.copy()
        self.config.update(scenario.config_overrides())
        if config:
            self.config.update(config)
        self.catalog = catalog
        self.command = list(command or [])
        self._orbits: Optional[List[OrbitSpec]] = None
        self._env: Optional[TaskingEnvironment] = None

    @classmethod
    def from_file(cls, path, config=None, catalog=None, command=None) -> "ConstellationDesigner":
        return cls(load_scenario(path), config, catalog, command)

    # --- shared plumbing ---------------------------------------------------

    @property
    def settings(self) -> PropagationSettings:
        return PropagationSettings.from_config(self.config)

    @property
    def search_settings(self) -> SearchSettings:
        return SearchSettings.from_config(self.config)

    def catalog_path(self) -> Path:
        for candidate in (self.catalog, self.scenario.catalog_path(), os.getenv("CISPHASE_CATALOG")):
            if candidate:
                return Path(candidate)
        raise ScenarioError("no catalog: pass --catalog, set 'catalog' in the scenario or CISPHASE_CATALOG")

    @property
    def orbits(self) -> List[OrbitSpec]:
        if self._orbits is None:
            path = self.catalog_path()
            print(f"⏳ Loading catalog {path}...")
            try:
                self._orbits = load_catalog(path, closure_tol=self.config["CLOSURE_TOL"], settings=self.settings)
            except OSError as e:
                raise ScenarioError(f"cannot read catalog {path}: {e}") from e
        return self._orbits

    @property
    def env(self) -> TaskingEnvironment:
        if self._env is None:
            print("⏳ Propagating targets and their STM chains...")
            self._env = self.scenario.environment(self.orbits, self.config)
        return self._env

    def objective(self, kind=None) -> BilevelObjective:
        kind = self.scenario.objective if kind is None else ObjectiveKind(kind)
        return BilevelObjective(self.env, kind, self.config["GAP_TOL"], self.config["NODE_LIMIT"])

    def _path(self, out_dir: Path, name: str, suffix: str = "csv") -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return out_dir / f"{self.scenario.short_digest}-{name}.{suffix}"

    def _report(self) -> RunReport:
        return RunReport(self.command, self.scenario.digest)

    def _finish(self, report: RunReport, out_dir: Path, title: str) -> RunReport:
        run_file = report.write_yaml(self._path(out_dir, "run", "yaml"))
        if self.config.get("PDF_REPORT"):
            pdf = write_run_report_pdf(self._path(out_dir, "run", "pdf"), title, report)
            report.outputs["pdf"] = str(pdf)
            run_file = report.write_yaml(run_file)
        for name, path in report.outputs.items():
            print(f"✅ Saved {name}: {path}")
        print(f"✅ Saved run report: {run_file}")
        if report.skipped:
            print(f"⚠️  {report.skipped} rows were skipped")
        if report.budget_exhausted:
            print(f"⚠️  branch-and-bound node budget exhausted {report.budget_exhausted} time(s)")
        return report

    # --- commands ----------------------------------------------------------

    def propagate(self, orbit_id: str, phase: float = 0.0, out_dir: Path = Path(".")) -> RunReport:
        """Trajectory of one catalog orbit over the scenario grid, terminal epoch included."""
        grid = self.scenario.resolve_grid(self.orbits, self.config["DEFAULT_STEPS"])
        orbit = index_catalog(self.orbits).get(orbit_id)
        if orbit is None:
            raise ScenarioError(f"orbit '{orbit_id}' is not in the catalog")
        print(f"⏳ Propagating {orbit_id} from phase {phase} over {grid.steps} steps...")
        states = sample_trajectory(orbit, phase, grid, self.settings, include_terminal=True)
        report = self._report()
        report.outputs["trajectory"] = str(write_trajectory(self._path(out_dir, "propagate"), grid.epochs, states))
        report.result = {"orbit": orbit_id, "phase": float(phase), "rows": int(len(states))}
        return self._finish(report, out_dir, f"propagate {orbit_id}")

    def scan(self, observer: int, phases: int, policy: str = "optimal", out_dir: Path = Path("."),
             kind=None) -> RunReport:
        """Sweep one observer's phase with the others held at their scenario phases."""
        obj = self.objective(kind)
        print(f"⏳ Sweeping observer {observer} over {phases} phases ({policy})...")
        sweep = sweep_phase(obj, observer, phase_grid(phases), self.scenario.observer_phases(), policy)
        report = self._report()
        report.outputs["sweep"] = str(write_sweep(self._path(out_dir, "scan"), sweep))
        report.skipped = sweep.skipped
        report.budget_exhausted = sweep.exhausted
        report.result = {"observer": observer, "phases": phases, "policy": policy,
                         "objective_kind": obj.kind.value, "rog": sweep.rog}
        if sweep.rog is not None:
            print(f"Relative optimality gap: {sweep.rog:.6g}")
        return self._finish(report, out_dir, f"scan observer {observer}")

    def optimize(self, method: str = "greedy", kind=None, starts: Optional[int] = None,
                 out_dir: Path = Path(".")) -> RunReport:
        """Phase search plus the lower-level schedule at the optimum."""
        if method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        kind = self.scenario.objective if kind is None else ObjectiveKind(kind)
        settings = self.search_settings
        if starts is not None:
            settings = dataclasses.replace(settings, starts=starts)
        search = greedy_search if method == "greedy" else exhaustive_search
        env = self.env
        print(f"⏳ Running {method} search ({kind.value}, {settings.starts} start(s))...")
        result = search(env, kind, self.scenario.initial_phases(), settings)

        report = self._report()
        report.outputs["summary"] = str(write_result_summary(self._path(out_dir, "optimize"), result))
        report.outputs["starts"] = str(write_starts(self._path(out_dir, "optimize-starts"), result))
        if result.control is not None:
            report.outputs["schedule"] = str(write_schedule(self._path(out_dir, "schedule"), result.control))
        report.result = {
            "method": result.method,
            "objective_kind": kind.value,
            "x_star": result.x_star.tolist(),
            "objective": result.objective,
            "log_objective": result.log_objective,
            "wall_time": result.wall_time,
            "evaluations": result.evaluations,
            "heuristic": result.heuristic,
            "solver_status": result.solver_status,
            "budget": None if result.control is None else observation_budget(result.control).tolist(),
        }
        report.starts = [{k: v for k, v in rec.items() if k != "history"} for rec in result.starts]
        report.budget_exhausted = int(result.solver_status == "node_limit")
        if result.heuristic:
            report.warnings.append("greedy decomposition is heuristic for the maxmin objective")
            print("⚠️  greedy decomposition is heuristic for the maxmin objective")
        print(f"x* = {format_vector(result.x_star)}  log(f) = {result.log_objective:.10g}  "
              f"({result.wall_time:.2f} s)")
        return self._finish(report, out_dir, f"optimize ({method}, {kind.value})")

    def budget(self, phases: int, kind=None, observer: int = 0, out_dir: Path = Path(".")) -> RunReport:
        """Per-target observation shares of the optimal schedule across one observer's phases."""
        obj = self.objective(kind)
        print(f"⏳ Computing observation budgets over {phases} phases ({obj.kind.value})...")
        rows = budget_sweep(obj, observer, phase_grid(phases), self.scenario.observer_phases())
        report = self._report()
        report.outputs["budget"] = str(write_budget(self._path(out_dir, "budget"), rows))
        report.skipped = sum(r.skipped for r in rows)
        report.budget_exhausted = sum(r.status == "node_limit" for r in rows)
        mins = [float(np.min(r.shares)) for r in rows if not r.skipped and r.shares.size]
        report.result = {"observer": observer, "phases": phases, "objective_kind": obj.kind.value,
                         "largest_min_share": max(mins) if mins else None}
        return self._finish(report, out_dir, f"budget ({obj.kind.value})")

    def validate_ekf(self, schedule_path, out_dir: Path = Path("."),
                     phases: Optional[Sequence[float]] = None) -> RunReport:
        """Run the covariance recursion over a schedule and check it against the batch tensor."""
        env = self.env
        phases = self.scenario.observer_phases() if phases is None else np.asarray(phases, dtype=float)
        if len(phases) != env.num_observers:
            raise ScenarioError(f"expected {env.num_observers} observer phases, got {len(phases)}")
        u = read_schedule(Path(schedule_path), (env.num_observers, env.num_targets, env.grid.steps))
        q = float(self.config["PROCESS_NOISE"])
        process_noise = q * np.eye(6) if q > 0 else None
        print(f"⏳ Running the covariance recursion over {len(u.assignments())} observations...")
        history = run_schedule(env, phases, u, process_noise=process_noise,
                               initial_variance=self.config["INITIAL_VARIANCE"])
        tensor = build_info_tensor(env, phases, self.config["WORKERS"])

        report = self._report()
        report.outputs["beliefs"] = str(write_belief_history(self._path(out_dir, "validate-ekf"), history))
        report.outputs["tensor"] = str(write_info_tensor(self._path(out_dir, "tensor"), tensor))
        residual = None
        if process_noise is not None:
            report.warnings.append("identity check skipped: process noise is non-zero")
        else:
            residual = information_identity_residual(history, env, tensor, u)
            if residual is None:
                report.warnings.append("identity check skipped: empty schedule")
        ok = None if residual is None else residual <= self.config["IDENTITY_TOL"]
        report.result = {"phases": np.asarray(phases).tolist(), "observations": len(u.assignments()),
                         "identity_residual": residual, "identity_ok": ok}
        if ok is False:
            report.warnings.append(f"information identity residual {residual:.3e} exceeds tolerance")
            print(f"⚠️  information identity residual {residual:.3e}")
        elif ok:
            print(f"Information identity residual: {residual:.3e}")
        return self._finish(report, out_dir, "EKF validation")

    def contour(self, observers: Sequence[int], phases: int, out_dir: Path = Path("."), kind=None) -> RunReport:
        """Objective over the joint phase grid of two observers."""
        obj = self.objective(kind)
        grid_phases = phase_grid(phases)
        print(f"⏳ Evaluating a {phases}x{phases} contour grid...")
        values = contour_grid(obj, observers, grid_phases, grid_phases, self.scenario.observer_phases())
        report = self._report()
        report.outputs["contour"] = str(write_contour(self._path(out_dir, "contour"), grid_phases,
                                                      grid_phases, values))
        p, q = np.unravel_index(int(np.argmax(values)), values.shape)
        report.result = {"observers": list(observers), "phases": phases,
                         "best": [float(grid_phases[p]), float(grid_phases[q])], "f_best": float(values[p, q])}
        return self._finish(report, out_dir, f"contour observers {observers[0]}, {observers[1]}")

    def separability(self, observer: int, other: int, fixed_values: Sequence[float], phases: int,
                     out_dir: Path = Path("."), kind=None) -> RunReport:
        """Sweeps of one observer under several fixed phases of another, with each curve's argmax."""
        obj = self.objective(kind)
        grid_phases = phase_grid(phases)
        print(f"⏳ Sweeping observer {observer} under {len(fixed_values)} phases of observer {other}...")
        curves = separability_study(obj, observer, other, fixed_values, grid_phases,
                                    self.scenario.observer_phases())
        report = self._report()
        report.outputs["separability"] = str(write_separability(self._path(out_dir, "separability"),
                                                                curves, grid_phases))
        report.skipped = int(sum(np.isnan(v).sum() for v in curves.values()))
        argmax: Dict[float, Any] = {}
        if all(np.any(~np.isnan(v)) for v in curves.values()):
            argmax = argmax_phases(curves, grid_phases)
            report.outputs["argmax"] = str(write_argmax(self._path(out_dir, "separability-argmax"), argmax))
            for fixed, best in argmax.items():
                print(f"  observer {other} at {fixed:.4g}: best phase {best:.4g}")
        report.result = {"observer": observer, "other": other, "argmax": {str(k): v for k, v in argmax.items()}}
        return self._finish(report, out_dir, f"separability observer {observer}")
