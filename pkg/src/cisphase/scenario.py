"""
Scenario files: the YAML description of one constellation study.

Example::

    name: case-study-1
    catalog: orbits.csv          # relative to the scenario file
    mu: 0.012150585609624
    grid: {t_start: 0.0, t_end: 3.4, steps: 215}
    observers:
      - {orbit: L1-a, phase: 0.5}
      - {orbit: L2-a}
    targets:
      - {orbit: L2-b, phase: 0.25}
    measurement: {sigma: 1.0e-5, rho_floor: 1.0e-6, close_approach: error}
    objective: max
    solver: {gap_tol: 1.0e-9, starts: 4}
    seed: 0

``grid.t_end`` defaults to one period of the longest target orbit and
``grid.steps`` to the configured default. Observer phases are optional;
target phases default to 0.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import yaml

from .catalog.orbits import OrbitSpec, TimeGrid, index_catalog, wrap_phase
from .dynamics.propagation import PropagationSettings
from .errors import CisphaseError, ScenarioError
from .observation.measurement import MeasurementModel
from .observation.tensor import TargetTrack, TaskingEnvironment
from .tasking import ObjectiveKind
from .utils.text import content_digest

logger = logging.getLogger(__name__)

MEASUREMENT_KEYS = {"sigma": "SIGMA", "rho_floor": "RHO_FLOOR", "close_approach": "CLOSE_APPROACH"}
SOLVER_KEYS = {
    "gap_tol": "GAP_TOL",
    "node_limit": "NODE_LIMIT",
    "gradient_step": "GRADIENT_STEP",
    "max_iter": "MAX_ITER",
    "grad_tol": "GRAD_TOL",
    "f_tol": "F_TOL",
    "starts": "STARTS",
    "workers": "WORKERS",
    "rel_tol": "REL_TOL",
    "abs_tol": "ABS_TOL",
    "max_step": "MAX_STEP",
    "process_noise": "PROCESS_NOISE",
    "initial_variance": "INITIAL_VARIANCE",
}
TOP_LEVEL_KEYS = {"name", "catalog", "mu", "grid", "observers", "targets", "measurement",
                  "objective", "solver", "seed"}


@dataclass
class Member:
    """An observer or target slot: a catalog orbit id and an optional phase."""

    orbit: str
    phase: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"orbit": self.orbit}
        if self.phase is not None:
            out["phase"] = self.phase
        return out


@dataclass
class GridSpec:
    t_start: float = 0.0
    t_end: Optional[float] = None
    steps: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"t_start": self.t_start}
        if self.t_end is not None:
            out["t_end"] = self.t_end
        if self.steps is not None:
            out["steps"] = self.steps
        return out


@dataclass
class Scenario:
    observers: List[Member]
    targets: List[Member]
    grid: GridSpec = field(default_factory=GridSpec)
    name: str = "scenario"
    catalog: Optional[str] = None
    mu: Optional[float] = None
    measurement: Dict[str, Any] = field(default_factory=dict)
    objective: ObjectiveKind = ObjectiveKind.MAX
    solver: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    base_dir: Optional[Path] = field(default=None, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name}
        if self.catalog is not None:
            out["catalog"] = self.catalog
        if self.mu is not None:
            out["mu"] = self.mu
        out["grid"] = self.grid.to_dict()
        out["observers"] = [m.to_dict() for m in self.observers]
        out["targets"] = [m.to_dict() for m in self.targets]
        if self.measurement:
            out["measurement"] = dict(self.measurement)
        out["objective"] = self.objective.value
        if self.solver:
            out["solver"] = dict(self.solver)
        out["seed"] = self.seed
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    @property
    def digest(self) -> str:
        """Content hash of the canonical dump; stamps every output file."""
        return content_digest(self.dump())

    @property
    def short_digest(self) -> str:
        return self.digest[:12]

    def config_overrides(self) -> Dict[str, Any]:
        """Scenario measurement/solver settings as designer config keys."""
        out = {MEASUREMENT_KEYS[k]: v for k, v in self.measurement.items()}
        out.update({SOLVER_KEYS[k]: v for k, v in self.solver.items()})
        out["SEED"] = self.seed
        return out

    def observer_phases(self, default: float = 0.0) -> np.ndarray:
        return np.array([default if m.phase is None else wrap_phase(m.phase) for m in self.observers])

    def initial_phases(self) -> Optional[np.ndarray]:
        """Search start x0: the stated observer phases, or None when none are given."""
        if all(m.phase is None for m in self.observers):
            return None
        return self.observer_phases(default=0.5)

    def catalog_path(self) -> Optional[Path]:
        if self.catalog is None:
            return None
        path = Path(self.catalog)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path

    # --- resolution against a catalog -------------------------------------

    def _lookup(self, orbits: Dict[str, OrbitSpec], member: Member, role: str) -> OrbitSpec:
        try:
            return orbits[member.orbit]
        except KeyError:
            raise ScenarioError(f"{role} orbit '{member.orbit}' is not in the catalog") from None

    def resolve_orbits(self, catalog: Sequence[OrbitSpec]):
        """(observer orbits, target orbits) looked up by id, with a shared mass ratio."""
        by_id = index_catalog(catalog)
        observers = [self._lookup(by_id, m, "observer") for m in self.observers]
        targets = [self._lookup(by_id, m, "target") for m in self.targets]
        ratios = {o.mu for o in observers + targets}
        if self.mu is not None:
            ratios.add(float(self.mu))
        if len(ratios) > 1:
            raise ScenarioError(f"orbits do not share one mass ratio: {sorted(ratios)}")
        return observers, targets

    def resolve_grid(self, catalog: Sequence[OrbitSpec], default_steps: int = 215) -> TimeGrid:
        observers, targets = self.resolve_orbits(catalog)
        t_end = self.grid.t_end
        if t_end is None:
            longest = targets or observers
            if not longest:
                raise ScenarioError("cannot derive a horizon without any orbits")
            t_end = self.grid.t_start + max(o.period for o in longest)
        steps = self.grid.steps if self.grid.steps is not None else default_steps
        try:
            return TimeGrid(float(self.grid.t_start), float(t_end), int(steps))
        except ValueError as e:
            raise ScenarioError(f"bad grid: {e}") from e

    def environment(self, catalog: Sequence[OrbitSpec], config: Dict[str, Any]) -> TaskingEnvironment:
        """Build the tasking environment; target tracks are propagated here, once."""
        observers, targets = self.resolve_orbits(catalog)
        grid = self.resolve_grid(catalog, config.get("DEFAULT_STEPS", 215))
        try:
            settings = PropagationSettings.from_config(config)
            model = MeasurementModel.from_config(config)
        except ValueError as e:
            raise ScenarioError(str(e)) from e
        tracks = []
        for member, orbit in zip(self.targets, targets):
            phase = 0.0 if member.phase is None else member.phase
            try:
                tracks.append(TargetTrack.build(orbit, phase, grid, settings))
            except CisphaseError as e:
                raise ScenarioError(f"target '{orbit.id}': {e}") from e
        logger.info("scenario %s: %d observers, %d targets, %d steps",
                    self.name, len(observers), len(tracks), grid.steps)
        return TaskingEnvironment(grid, observers, tracks, model, settings, self.short_digest)


def _members(raw, role: str) -> List[Member]:
    if not isinstance(raw, list):
        raise ScenarioError(f"'{role}' must be a list")
    members = []
    for entry in raw:
        if isinstance(entry, str):
            entry = {"orbit": entry}
        if not isinstance(entry, dict) or "orbit" not in entry:
            raise ScenarioError(f"every {role} entry needs an 'orbit' id")
        unknown = set(entry) - {"orbit", "phase"}
        if unknown:
            raise ScenarioError(f"unknown {role} keys: {sorted(unknown)}")
        phase = entry.get("phase")
        members.append(Member(str(entry["orbit"]), None if phase is None else float(phase)))
    return members


def _section(raw: Dict[str, Any], key: str, allowed) -> Dict[str, Any]:
    section = raw.get(key) or {}
    if not isinstance(section, dict):
        raise ScenarioError(f"'{key}' must be a mapping")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown {key} keys: {sorted(unknown)}")
    return dict(section)


def parse_scenario(text: str, base_dir: Optional[Path] = None) -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(f"scenario is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    if "observers" not in raw or "targets" not in raw:
        raise ScenarioError("scenario needs 'observers' and 'targets'")

    grid_raw = _section(raw, "grid", {"t_start", "t_end", "steps"})
    grid = GridSpec(
        t_start=float(grid_raw.get("t_start", 0.0)),
        t_end=None if grid_raw.get("t_end") is None else float(grid_raw["t_end"]),
        steps=None if grid_raw.get("steps") is None else int(grid_raw["steps"]),
    )
    if grid.steps is not None and grid.steps < 1:
        raise ScenarioError("grid.steps must be at least 1")
    if grid.t_end is not None and not grid.t_end > grid.t_start:
        raise ScenarioError("grid.t_end must be after grid.t_start")
    try:
        objective = ObjectiveKind(raw.get("objective", "max"))
    except ValueError:
        raise ScenarioError(f"objective must be 'max' or 'maxmin', got {raw.get('objective')!r}") from None

    return Scenario(
        observers=_members(raw["observers"], "observers"),
        targets=_members(raw["targets"], "targets"),
        grid=grid,
        name=str(raw.get("name", "scenario")),
        catalog=None if raw.get("catalog") is None else str(raw["catalog"]),
        mu=None if raw.get("mu") is None else float(raw["mu"]),
        measurement=_section(raw, "measurement", MEASUREMENT_KEYS),
        objective=objective,
        solver=_section(raw, "solver", SOLVER_KEYS),
        seed=int(raw.get("seed", 0)),
        base_dir=base_dir,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    return parse_scenario(text, base_dir=path.parent)
