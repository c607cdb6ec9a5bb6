"""Objective landscapes over observer phases: 1-D sweeps, 2-D grids, separability and budgets."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import CisphaseError
from ..tasking import observation_budget, relative_optimality_gap
from .objective import BilevelObjective
from .search import natural_log

logger = logging.getLogger(__name__)

POLICIES = ("optimal", "myopic", "both")


@dataclass
class SweepRow:
    phase: float
    f_opt: Optional[float] = None
    f_myop: Optional[float] = None
    error: Optional[str] = None
    status: str = "optimal"

    @property
    def skipped(self) -> bool:
        return self.error is not None

    @property
    def log_f_opt(self) -> Optional[float]:
        return None if self.f_opt is None else natural_log(self.f_opt)


@dataclass
class Sweep:
    observer: int
    policy: str
    rows: List[SweepRow] = field(default_factory=list)
    rog: Optional[float] = None

    @property
    def skipped(self) -> int:
        return sum(row.skipped for row in self.rows)

    @property
    def exhausted(self) -> int:
        return sum(row.status == "node_limit" for row in self.rows)

    def values(self) -> np.ndarray:
        return np.array([np.nan if r.f_opt is None else r.f_opt for r in self.rows])


def phase_grid(count: int) -> np.ndarray:
    """count evenly spaced phases on [0, 1)."""
    if count < 1:
        raise ValueError("a sweep needs at least one phase")
    return np.arange(count) / count


def _base_phases(obj: BilevelObjective, fixed: Optional[Sequence[float]]) -> np.ndarray:
    if fixed is None:
        return np.zeros(obj.dimension)
    fixed = np.asarray(fixed, dtype=float)
    if fixed.size != obj.dimension:
        raise ValueError(f"expected {obj.dimension} fixed phases, got {fixed.size}")
    return fixed.copy()


def sweep_phase(obj: BilevelObjective, observer: int, phases: Sequence[float],
                fixed: Optional[Sequence[float]] = None, policy: str = "optimal") -> Sweep:
    """Vary one observer's phase with the others held at ``fixed`` (default 0).

    Rows whose evaluation fails are kept with their error message.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    if not 0 <= observer < obj.dimension:
        raise ValueError(f"observer index {observer} out of range")
    base = _base_phases(obj, fixed)
    sweep = Sweep(observer, policy)
    for phase in phases:
        x = base.copy()
        x[observer] = phase
        row = SweepRow(float(phase))
        try:
            evaluation = obj.solve_at(x)
            # the optimal column is always computed; it is the reference for the myopic one
            row.f_opt = evaluation.objective
            row.status = evaluation.solution.solver_stats.get("status", "optimal")
            if policy in ("myopic", "both"):
                row.f_myop = evaluation.myopic_objective(obj.env, obj.kind)
        except CisphaseError as e:
            logger.warning("phase %.6g skipped: %s", phase, e)
            row.error = str(e)
        sweep.rows.append(row)

    if policy == "both":
        good = [r for r in sweep.rows if not r.skipped]
        if good:
            try:
                sweep.rog = relative_optimality_gap([r.f_opt for r in good], [r.f_myop for r in good])
            except CisphaseError as e:
                logger.warning("relative optimality gap unavailable: %s", e)
    return sweep


def contour_grid(obj: BilevelObjective, observers: Sequence[int], phases_a: Sequence[float],
                 phases_b: Sequence[float], fixed: Optional[Sequence[float]] = None) -> np.ndarray:
    """Objective over a grid of two observers' phases; shape (len(phases_a), len(phases_b))."""
    a, b = observers
    if a == b:
        raise ValueError("contour needs two distinct observers")
    base = _base_phases(obj, fixed)
    grid = np.empty((len(phases_a), len(phases_b)))
    for p, pa in enumerate(phases_a):
        for q, pb in enumerate(phases_b):
            x = base.copy()
            x[a], x[b] = pa, pb
            grid[p, q] = obj.evaluate(x)
    return grid


def local_maxima(values: Sequence[float], periodic: bool = True) -> List[int]:
    """Indices that beat their left neighbour and are not beaten by the right one."""
    v = np.asarray(values, dtype=float)
    n = v.size
    found = []
    for i in range(n):
        if not periodic and (i == 0 or i == n - 1):
            continue
        left, right = v[(i - 1) % n], v[(i + 1) % n]
        if v[i] > left and v[i] >= right:
            found.append(i)
    return found


def separability_study(obj: BilevelObjective, observer: int, other: int,
                       fixed_values: Sequence[float], phases: Sequence[float],
                       fixed: Optional[Sequence[float]] = None) -> Dict[float, np.ndarray]:
    """One sweep of ``observer`` per fixed phase of ``other``; keyed by that fixed phase."""
    base = _base_phases(obj, fixed)
    curves: Dict[float, np.ndarray] = {}
    for value in fixed_values:
        x = base.copy()
        x[other] = value
        curves[float(value)] = sweep_phase(obj, observer, phases, x).values()
    return curves


def argmax_phases(curves: Dict[float, np.ndarray], phases: Sequence[float]) -> Dict[float, float]:
    phases = np.asarray(phases, dtype=float)
    return {key: float(phases[int(np.nanargmax(values))]) for key, values in curves.items()}


@dataclass
class BudgetRow:
    phase: float
    shares: Optional[np.ndarray] = None
    objective: Optional[float] = None
    status: str = "optimal"
    error: Optional[str] = None

    @property
    def skipped(self) -> bool:
        return self.error is not None


def budget_sweep(obj: BilevelObjective, observer: int, phases: Sequence[float],
                 fixed: Optional[Sequence[float]] = None) -> List[BudgetRow]:
    """Per-target observation shares of the optimal schedule at each phase."""
    if not 0 <= observer < obj.dimension:
        raise ValueError(f"observer index {observer} out of range")
    base = _base_phases(obj, fixed)
    rows: List[BudgetRow] = []
    for phase in phases:
        x = base.copy()
        x[observer] = phase
        row = BudgetRow(float(phase))
        try:
            solution = obj.solve_at(x).solution
            row.shares = observation_budget(solution.control)
            row.objective = solution.objective
            row.status = solution.solver_stats.get("status", "optimal")
        except CisphaseError as e:
            logger.warning("phase %.6g skipped: %s", phase, e)
            row.error = str(e)
        rows.append(row)
    return rows
