"""Assembly of the information coefficient tensor A[i, j, k] = tr(I_ij(t_L, t_k))."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from ..catalog.orbits import OrbitSpec, TimeGrid, phase_to_state, sample_trajectory, wrap_phase
from ..dynamics.propagation import DEFAULT_SETTINGS, PropagationSettings, propagate_sequence
from ..errors import CloseApproachError, PropagationError, SingularPositionError
from .measurement import MeasurementModel, _noise_factor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TargetTrack:
    """Phase-independent target data: states on the full grid and the STM chain.

    ``stms[k]`` is the cumulative Phi(t_0 -> t_k), k = 0..L.
    """

    orbit: OrbitSpec
    phase: float
    states: np.ndarray
    stms: np.ndarray

    @classmethod
    def build(cls, orbit: OrbitSpec, phase: float, grid: TimeGrid,
              settings: PropagationSettings = DEFAULT_SETTINGS) -> "TargetTrack":
        start = phase_to_state(orbit, phase, grid.t_start, settings)
        states, stms = propagate_sequence(start, grid.epochs, orbit.mu, settings, with_stm=True)
        return cls(orbit, wrap_phase(phase), states, np.array(stms))

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    def forward_to_terminal(self, k: int) -> np.ndarray:
        """Phi(t_k -> t_L) = Phi(t_0 -> t_L) Phi(t_0 -> t_k)^-1."""
        return np.linalg.solve(self.stms[k].T, self.stms[-1].T).T

    def terminal_sensitivity(self, k: int) -> np.ndarray:
        """d x(t_k) / d x(t_L), the inverse of forward_to_terminal(k)."""
        return np.linalg.solve(self.stms[-1].T, self.stms[k].T).T

    def terminal_sensitivities(self) -> np.ndarray:
        """Stacked terminal_sensitivity for the L observation epochs."""
        inv_terminal = np.linalg.inv(self.stms[-1])
        return self.stms[:-1] @ inv_terminal


@dataclass(frozen=True, eq=False)
class TaskingEnvironment:
    """Observers (orbits, phases free) and targets (tracks, phases fixed) on one grid."""

    grid: TimeGrid
    observer_orbits: List[OrbitSpec]
    targets: List[TargetTrack]
    measurement: MeasurementModel = field(default_factory=MeasurementModel)
    settings: PropagationSettings = DEFAULT_SETTINGS
    label: str = ""

    @property
    def num_observers(self) -> int:
        return len(self.observer_orbits)

    @property
    def num_targets(self) -> int:
        return len(self.targets)

    def with_observers(self, indices: Sequence[int]) -> "TaskingEnvironment":
        """Copy keeping only the listed observers, in the listed order."""
        return replace(self, observer_orbits=[self.observer_orbits[i] for i in indices])

    def observer_states(self, i: int, phase: float) -> np.ndarray:
        try:
            return sample_trajectory(self.observer_orbits[i], phase, self.grid, self.settings)
        except (PropagationError, SingularPositionError) as e:
            raise PropagationError(str(e), observer=i) from e

    def target_positions(self) -> np.ndarray:
        """(N, L, 3) target positions at the observation epochs."""
        if not self.targets:
            return np.zeros((0, self.grid.steps, 3))
        return np.stack([t.states[:-1, :3] for t in self.targets])


@dataclass(frozen=True, eq=False)
class InfoTensor:
    """Nonnegative coefficients A[i, j, k] over observers x targets x steps."""

    values: np.ndarray
    grid: Optional[TimeGrid] = None
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"information tensor must be 3-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("information coefficients must be finite and non-negative")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    def observer(self, i: int) -> "InfoTensor":
        return InfoTensor(self.values[i:i + 1], self.grid, self.label)


def observer_slice(observer_positions: np.ndarray, targets: Sequence[TargetTrack],
                   model: MeasurementModel, observer: Optional[int] = None) -> np.ndarray:
    """(N, L) coefficients for one observer's positions at the L observation epochs.

    Entry (j, k) is tr(S_k^T H^T R^-1 H S_k) with S_k = d x_j(t_k) / d x_j(t_L)
    from ``TargetTrack.terminal_sensitivities``, the inverse of the forward
    map Phi(t_k -> t_L). This is the information a step-k measurement carries
    about the terminal state, which is what the information-form filter
    accumulates when run forward to t_L with no process noise.
    """
    num_steps = observer_positions.shape[0]
    coeffs = np.zeros((len(targets), num_steps))
    chol, lower = _noise_factor(model.noise)
    tri = np.tril(chol) if lower else np.triu(chol).T
    for j, track in enumerate(targets):
        rel = track.states[:-1, :3] - observer_positions[:, :3]
        rho = np.linalg.norm(rel, axis=1)
        close = rho <= model.rho_floor
        if np.any(close):
            k = int(np.argmax(close))
            if not model.clamp:
                raise CloseApproachError(float(rho[k]), model.rho_floor, observer, j, k)
            logger.warning("clamping %d close approaches (observer %s, target %d)",
                           int(close.sum()), observer, j)
        safe = np.where(rho > 0, rho, 1.0)
        u = rel / safe[:, None]
        rho_eff = np.maximum(rho, model.rho_floor) if model.clamp else rho
        proj = (np.eye(3)[None, :, :] - u[:, :, None] * u[:, None, :]) / rho_eff[:, None, None]
        # H Phi only involves the position rows of Phi because H's velocity block is zero.
        mapped = proj @ track.terminal_sensitivities()[:, :3, :]
        whitened = np.stack([solve_triangular(tri, m, lower=True) for m in mapped])
        coeffs[j] = np.einsum("kab,kab->k", whitened, whitened)
    return coeffs


def build_info_tensor(env: TaskingEnvironment, phases: Sequence[float],
                      workers: int = 1) -> InfoTensor:
    """A[i, j, k] for every observer at its phase. Slice i depends only on phases[i]."""
    phases = [wrap_phase(p) for p in np.atleast_1d(np.asarray(phases, dtype=float))]
    if len(phases) != env.num_observers:
        raise ValueError(f"expected {env.num_observers} phases, got {len(phases)}")

    def one(i: int) -> np.ndarray:
        states = env.observer_states(i, phases[i])
        return observer_slice(states, env.targets, env.measurement, observer=i)

    if workers > 1 and env.num_observers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(one, range(env.num_observers)))
    else:
        slices = [one(i) for i in range(env.num_observers)]
    values = np.stack(slices) if slices else np.zeros((0, env.num_targets, env.grid.steps))
    return InfoTensor(values, env.grid, env.label)
