"""Linearized Kalman covariance recursion over a tasking schedule.

Beliefs carry both the covariance P and the information matrix P^-1 so the
measurement update can be done in information form without repeated
inversion of an ill-conditioned matrix.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..dynamics.cr3bp import as_state
from ..errors import NonInvertibleNoiseError
from ..observation.measurement import observation_jacobian
from ..observation.tensor import InfoTensor, TaskingEnvironment
from ..tasking.schedule import ControlTensor, ObjectiveKind, evaluate_control

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
SYMMETRY_TOL = 1e-10


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _check_spd(m: np.ndarray, what: str) -> None:
    scale = max(np.abs(m).max(), 1e-300)
    if np.abs(m - m.T).max() > SYMMETRY_TOL * scale:
        raise ValueError(f"{what} is not symmetric")
    try:
        cho_factor(m)
    except LinAlgError as e:
        raise ValueError(f"{what} is not positive definite") from e


def _report_conditioning(information: np.ndarray, where: str) -> bool:
    cond = np.linalg.cond(information)
    if cond > CONDITION_LIMIT:
        logger.warning("ill-conditioned covariance %s: condition number %.3e", where, cond)
        return True
    return False


@dataclass(frozen=True, eq=False)
class TargetBelief:
    """State estimate and covariance of one target (information matrix kept alongside)."""

    state: np.ndarray
    covariance: np.ndarray
    information: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "state", as_state(self.state))
        cov = _symmetrize(np.asarray(self.covariance, dtype=float))
        _check_spd(cov, "covariance")
        object.__setattr__(self, "covariance", cov)
        info = self.information
        info = np.linalg.inv(cov) if info is None else np.asarray(info, dtype=float)
        object.__setattr__(self, "information", _symmetrize(info))

    @classmethod
    def isotropic(cls, state, variance: float) -> "TargetBelief":
        return cls(state, variance * np.eye(6), np.eye(6) / variance)


def predict(belief: TargetBelief, stm_step: np.ndarray, process_noise: Optional[np.ndarray] = None,
            next_state: Optional[np.ndarray] = None) -> TargetBelief:
    """Time update P <- Phi P Phi^T + Q.

    ``next_state`` is the reference state at the new epoch; when omitted the
    state is mapped by the STM.
    """
    phi = np.asarray(stm_step, dtype=float)
    state = phi @ belief.state if next_state is None else next_state
    cov = _symmetrize(phi @ belief.covariance @ phi.T)
    if process_noise is None or not np.any(process_noise):
        # Q = 0: information maps by the inverse congruence, no re-inversion
        left = np.linalg.solve(phi.T, belief.information)
        info = np.linalg.solve(phi.T, left.T).T
        return TargetBelief(state, cov, _symmetrize(info))
    cov = _symmetrize(cov + np.asarray(process_noise, dtype=float))
    return TargetBelief(state, cov)


def update(belief: TargetBelief, jac: np.ndarray, noise: np.ndarray) -> TargetBelief:
    """Information-form measurement update: P^-1 <- P^-1 + H^T R^-1 H."""
    try:
        factor = cho_factor(np.asarray(noise, dtype=float))
    except LinAlgError as e:
        raise NonInvertibleNoiseError(f"measurement noise is not positive definite: {e}") from e
    jac = np.asarray(jac, dtype=float)
    info = _symmetrize(belief.information + jac.T @ cho_solve(factor, jac))
    _report_conditioning(info, "after update")
    cov = _symmetrize(np.linalg.inv(info))
    return TargetBelief(belief.state, cov, info)


@dataclass
class BeliefHistory:
    """beliefs[j][k]: target j after the updates at t_k (k < L); beliefs[j][L] is the terminal prediction."""

    beliefs: List[List[TargetBelief]]
    initial: List[TargetBelief]

    def rows(self):
        """(step, target, trace_P, trace_Pinv, det_P) in step-major order."""
        out = []
        steps = len(self.beliefs[0]) if self.beliefs else 0
        for k in range(steps):
            for j, history in enumerate(self.beliefs):
                b = history[k]
                out.append((k, j, float(np.trace(b.covariance)), float(np.trace(b.information)),
                            float(np.linalg.det(b.covariance))))
        return out


def run_schedule(env: TaskingEnvironment, phases: Sequence[float], u: ControlTensor,
                 initial: Optional[Sequence[TargetBelief]] = None,
                 process_noise: Optional[np.ndarray] = None,
                 initial_variance: float = 1e-6) -> BeliefHistory:
    """Alternate updates and predictions along the grid for every target.

    Targets with no assigned observation at a step only predict. The
    linearization reference is each target's true trajectory.
    """
    M, N, L = u.shape
    if (M, N, L) != (env.num_observers, env.num_targets, env.grid.steps):
        raise ValueError(f"schedule shape {u.shape} does not match the environment")
    if initial is None:
        initial = [TargetBelief.isotropic(t.states[0], initial_variance) for t in env.targets]
    observer_positions = [env.observer_states(i, phases[i])[:, :3] for i in range(M)] if u.values.any() else []
    model = env.measurement

    histories: List[List[TargetBelief]] = []
    for j, track in enumerate(env.targets):
        belief = initial[j]
        history = []
        for k in range(L):
            for i in range(M):
                if u.values[i, j, k]:
                    jac = observation_jacobian(observer_positions[i][k], track.states[k, :3],
                                               model.rho_floor, model.clamp)
                    belief = update(belief, jac, model.noise)
            history.append(belief)
            step = np.linalg.solve(track.stms[k].T, track.stms[k + 1].T).T
            belief = predict(belief, step, process_noise, next_state=track.states[k + 1])
        history.append(belief)
        histories.append(history)
    return BeliefHistory(histories, list(initial))


def accumulated_information(history: BeliefHistory, env: TaskingEnvironment) -> List[np.ndarray]:
    """P^-1(t_L) minus the prior information mapped to t_L, per target."""
    out = []
    for j, track in enumerate(env.targets):
        terminal = track.stms[-1]
        prior = history.initial[j].information
        left = np.linalg.solve(terminal.T, prior)
        mapped = np.linalg.solve(terminal.T, left.T).T
        out.append(history.beliefs[j][-1].information - mapped)
    return out


def information_identity_residual(history: BeliefHistory, env: TaskingEnvironment,
                                  tensor: InfoTensor, u: ControlTensor) -> Optional[float]:
    """Relative mismatch between recursive and batch information (None for an empty schedule)."""
    expected = evaluate_control(tensor, u, ObjectiveKind.MAX)
    if expected == 0:
        return None
    recursive = sum(float(np.trace(a)) for a in accumulated_information(history, env))
    return abs(recursive - expected) / abs(expected)
