"""Tasking schedules, the max-objective solver, the myopic baseline and schedule metrics."""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..errors import InfeasibleControlError, NonPositiveObjectiveError
from ..observation.tensor import InfoTensor

logger = logging.getLogger(__name__)


class ObjectiveKind(Enum):
    """Upper/lower level objective."""

    MAX = "max"
    MAXMIN = "maxmin"


def _values(A) -> np.ndarray:
    return A.values if isinstance(A, InfoTensor) else np.asarray(A, dtype=float)


@dataclass(frozen=True, eq=False)
class ControlTensor:
    """Binary schedule u[i, j, k]; each observer views at most one target per step."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 3:
            raise ValueError(f"control must be 3-D, got shape {values.shape}")
        if not np.all((values == 0) | (values == 1)):
            raise ValueError("control entries must be exactly 0 or 1")
        values = values.astype(np.int8)
        per_slot = values.sum(axis=1)
        if np.any(per_slot > 1):
            i, k = np.argwhere(per_slot > 1)[0]
            raise InfeasibleControlError(int(i), int(k))
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, shape: Tuple[int, int, int]) -> "ControlTensor":
        return cls(np.zeros(shape, dtype=np.int8))

    @classmethod
    def from_assignments(cls, shape: Tuple[int, int, int],
                         rows: Iterable[Tuple[int, int, int]]) -> "ControlTensor":
        """Build from (step, observer, target) rows."""
        values = np.zeros(shape, dtype=np.int8)
        for step, observer, target in rows:
            if values[observer, :, step].any():
                raise InfeasibleControlError(observer, step)
            values[observer, target, step] = 1
        return cls(values)

    @property
    def shape(self):
        return self.values.shape

    def assignments(self) -> List[Tuple[int, int, int]]:
        """(step, observer, target) for every assigned slot, sorted by step then observer."""
        idx = np.argwhere(self.values == 1)
        return sorted((int(k), int(i), int(j)) for i, j, k in idx)

    def __eq__(self, other) -> bool:
        return isinstance(other, ControlTensor) and np.array_equal(self.values, other.values)


@dataclass
class TaskingSolution:
    control: ControlTensor
    objective: float
    per_target_info: np.ndarray
    kind: ObjectiveKind
    solver_stats: Dict[str, Any] = field(default_factory=dict)


def per_target_info(A, u: ControlTensor) -> np.ndarray:
    """sum_{i,k} u[i,j,k] A[i,j,k] for each target j."""
    return np.einsum("ijk,ijk->j", _values(A), u.values.astype(float))


def evaluate_control(A, u: ControlTensor, kind=ObjectiveKind.MAX) -> float:
    """Objective value of a schedule: total information or worst-target information."""
    kind = ObjectiveKind(kind)
    values = _values(A)
    if not isinstance(u, ControlTensor):
        u = ControlTensor(u)
    if u.shape != values.shape:
        raise ValueError(f"control shape {u.shape} does not match tensor shape {values.shape}")
    if kind is ObjectiveKind.MAX:
        return float(np.sum(values * u.values))
    totals = per_target_info(values, u)
    return float(totals.min()) if totals.size else 0.0


def solve_max(A) -> TaskingSolution:
    """Exact max-objective tasking: per (i, k), view the target with the largest coefficient.

    Ties go to the lowest target index.
    """
    start = time.perf_counter()
    values = _values(A)
    M, N, L = values.shape
    u = np.zeros(values.shape, dtype=np.int8)
    if N > 0:
        best = np.argmax(values, axis=1)
        ii, kk = np.meshgrid(np.arange(M), np.arange(L), indexing="ij")
        u[ii, best, kk] = 1
    control = ControlTensor(u)
    totals = per_target_info(values, control)
    return TaskingSolution(
        control=control,
        objective=float(totals.sum()),
        per_target_info=totals,
        kind=ObjectiveKind.MAX,
        solver_stats={"status": "optimal", "nodes": 0, "iterations": 0,
                      "wall_time": time.perf_counter() - start},
    )


def myopic_policy(observer_positions: np.ndarray, target_positions: np.ndarray) -> ControlTensor:
    """Task each observer to its nearest target at every step.

    observer_positions is (M, L, 3), target_positions is (N, L, 3).
    """
    obs = np.asarray(observer_positions, dtype=float)[..., :3]
    tgt = np.asarray(target_positions, dtype=float)[..., :3]
    M, L = obs.shape[:2]
    N = tgt.shape[0]
    u = np.zeros((M, N, L), dtype=np.int8)
    if N > 0 and M > 0:
        # (M, N, L) separations
        dist = np.linalg.norm(obs[:, None, :, :] - tgt[None, :, :, :], axis=-1)
        nearest = np.argmin(dist, axis=1)
        ii, kk = np.meshgrid(np.arange(M), np.arange(L), indexing="ij")
        u[ii, nearest, kk] = 1
    return ControlTensor(u)


def relative_optimality_gap(f_opt: Sequence[float], f_myop: Sequence[float]) -> float:
    """Mean of (f_opt - f_myop) / f_opt over a phase sweep."""
    f_opt = np.asarray(f_opt, dtype=float)
    f_myop = np.asarray(f_myop, dtype=float)
    if f_opt.shape != f_myop.shape or f_opt.ndim != 1:
        raise ValueError("f_opt and f_myop must be 1-D sequences of equal length")
    if f_opt.size == 0:
        raise ValueError("at least one phase is required")
    if np.any(f_opt <= 0):
        raise NonPositiveObjectiveError("every optimal objective must be strictly positive")
    return float(np.mean((f_opt - f_myop) / f_opt))


def observation_budget(u: ControlTensor) -> np.ndarray:
    """Fraction of assigned slots that went to each target (all zeros for an empty schedule)."""
    counts = u.values.sum(axis=(0, 2)).astype(float)
    total = counts.sum()
    if total == 0:
        return np.zeros_like(counts)
    return counts / total


def control_difference(u_a: ControlTensor, u_b: ControlTensor) -> List[int]:
    """Steps at which the two schedules task any observer differently."""
    if u_a.shape != u_b.shape:
        raise ValueError("schedules have different shapes")
    differs = np.any(u_a.values != u_b.values, axis=(0, 1))
    return [int(k) for k in np.flatnonzero(differs)]
