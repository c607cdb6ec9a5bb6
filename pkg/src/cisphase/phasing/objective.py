"""Upper-level objective: observer phases -> information tensor -> optimal tasking value."""

import logging
import threading
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..catalog.orbits import wrap_phase
from ..observation.tensor import InfoTensor, TaskingEnvironment, observer_slice
from ..tasking import ObjectiveKind, TaskingSolution, myopic_policy, solve
from ..tasking.schedule import ControlTensor, evaluate_control

logger = logging.getLogger(__name__)


@dataclass
class Evaluation:
    """Everything produced by one upper-level evaluation."""

    phases: np.ndarray
    tensor: InfoTensor
    solution: TaskingSolution
    observer_states: List[np.ndarray]

    @property
    def objective(self) -> float:
        return self.solution.objective

    def myopic_control(self, env: TaskingEnvironment) -> ControlTensor:
        positions = np.stack([s[:, :3] for s in self.observer_states]) if self.observer_states \
            else np.zeros((0, env.grid.steps, 3))
        return myopic_policy(positions, env.target_positions())

    def myopic_objective(self, env: TaskingEnvironment, kind: ObjectiveKind) -> float:
        return evaluate_control(self.tensor, self.myopic_control(env), kind)


class BilevelObjective:
    """Objective of the phasing problem for a fixed environment and objective kind.

    Target tracks (states and STM chains) live in the environment and are
    computed once; each evaluation only re-propagates the observers.
    """

    def __init__(self, env: TaskingEnvironment, kind=ObjectiveKind.MAX,
                 gap_tol: float = 1e-9, node_limit: int = 10 ** 6):
        self.env = env
        self.kind = ObjectiveKind(kind)
        self.gap_tol = gap_tol
        self.node_limit = node_limit
        self._lock = threading.Lock()
        self.evaluations = 0

    @property
    def dimension(self) -> int:
        return self.env.num_observers

    def restricted_to(self, indices: Sequence[int]) -> "BilevelObjective":
        """Same objective over a subset of the observers."""
        return BilevelObjective(self.env.with_observers(indices), self.kind, self.gap_tol, self.node_limit)

    def solve_at(self, x: Sequence[float]) -> Evaluation:
        phases = np.array([wrap_phase(p) for p in np.atleast_1d(np.asarray(x, dtype=float))])
        if phases.size != self.dimension:
            raise ValueError(f"expected {self.dimension} phases, got {phases.size}")
        if not np.all(np.isfinite(phases)):
            raise ValueError("phases must be finite")
        with self._lock:
            self.evaluations += 1
        states = [self.env.observer_states(i, phases[i]) for i in range(self.dimension)]
        slices = [observer_slice(s, self.env.targets, self.env.measurement, observer=i)
                  for i, s in enumerate(states)]
        values = np.stack(slices) if slices else np.zeros((0, self.env.num_targets, self.env.grid.steps))
        tensor = InfoTensor(values, self.env.grid, self.env.label)
        solution = solve(tensor, self.kind, gap_tol=self.gap_tol, node_limit=self.node_limit)
        return Evaluation(phases, tensor, solution, states)

    def evaluate(self, x: Sequence[float]) -> float:
        return self.solve_at(x).objective

    __call__ = evaluate


def evaluate(obj: BilevelObjective, x: Sequence[float]) -> float:
    """Upper-level objective value at phases x (wrapped into [0, 1))."""
    return obj.evaluate(x)


def numerical_gradient(obj: BilevelObjective, x: Sequence[float], h: float = 1e-6,
                       f: Optional[callable] = None) -> np.ndarray:
    """Central-difference gradient; perturbed phases wrap periodically."""
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    f = f or obj.evaluate
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    for i in range(x.size):
        step = np.zeros(x.size)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad
