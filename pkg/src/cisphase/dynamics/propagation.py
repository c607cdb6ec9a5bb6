"""Numerical propagation of CR3BP states and state transition matrices."""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import PropagationError
from .cr3bp import SINGULARITY_FLOOR, as_state, eom, eom_jacobian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PropagationSettings:
    """Integrator tolerances. DOP853 is used for every propagation."""

    rel_tol: float = 1e-13
    abs_tol: float = 1e-14
    max_step: float = np.inf
    singularity_floor: float = SINGULARITY_FLOOR

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("integrator tolerances must be strictly positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be strictly positive")

    @classmethod
    def from_config(cls, config: dict) -> "PropagationSettings":
        return cls(
            rel_tol=config.get("REL_TOL", 1e-13),
            abs_tol=config.get("ABS_TOL", 1e-14),
            max_step=config.get("MAX_STEP", np.inf),
        )


DEFAULT_SETTINGS = PropagationSettings()


def _state_rhs(mu: float, floor: float):
    def rhs(t, y):
        return eom(y, mu, floor)
    return rhs


def _variational_rhs(mu: float, floor: float):
    def rhs(t, y):
        state = y[:6]
        phi = y[6:].reshape(6, 6)
        dphi = eom_jacobian(state, mu, floor) @ phi
        return np.concatenate([eom(state, mu, floor), dphi.ravel()])
    return rhs


def _integrate(rhs, y0: np.ndarray, t0: float, t1: float, settings: PropagationSettings) -> np.ndarray:
    sol = solve_ivp(
        rhs,
        (t0, t1),
        y0,
        method="DOP853",
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=settings.max_step,
    )
    if sol.status != 0:
        raise PropagationError(f"integration from t={t0:.6g} to t={t1:.6g} failed: {sol.message}")
    y1 = sol.y[:, -1]
    if not np.all(np.isfinite(y1)):
        raise PropagationError(f"non-finite state reached at t={t1:.6g}")
    logger.debug("propagated %.6g -> %.6g in %d rhs evaluations", t0, t1, sol.nfev)
    return y1


def propagate(state, t0: float, t1: float, mu: float,
              settings: PropagationSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Flow of the equations of motion from t0 to t1 (either direction)."""
    state = as_state(state)
    if t1 == t0:
        return state.copy()
    return _integrate(_state_rhs(mu, settings.singularity_floor), state, t0, t1, settings)


def propagate_with_stm(state, t0: float, t1: float, mu: float,
                       settings: PropagationSettings = DEFAULT_SETTINGS) -> Tuple[np.ndarray, np.ndarray]:
    """Propagate the state together with the 6x6 state transition matrix.

    The state and the 36 variational components are integrated as one
    42-dimensional system.
    """
    state = as_state(state)
    if t1 == t0:
        return state.copy(), np.eye(6)
    y0 = np.concatenate([state, np.eye(6).ravel()])
    y1 = _integrate(_variational_rhs(mu, settings.singularity_floor), y0, t0, t1, settings)
    return y1[:6], y1[6:].reshape(6, 6)


def propagate_sequence(state, times: Sequence[float], mu: float,
                       settings: PropagationSettings = DEFAULT_SETTINGS,
                       with_stm: bool = False) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Propagate through consecutive epochs, one segment at a time.

    ``state`` is taken to hold at ``times[0]``. Returns the (len(times), 6)
    state array and, when ``with_stm`` is set, the cumulative STMs
    Phi(times[0] -> times[k]) chained from the per-segment matrices.
    """
    times = [float(t) for t in times]
    states = np.empty((len(times), 6))
    states[0] = as_state(state)
    stms = [np.eye(6)] if with_stm else []
    for k in range(1, len(times)):
        if with_stm:
            states[k], step = propagate_with_stm(states[k - 1], times[k - 1], times[k], mu, settings)
            stms.append(step @ stms[-1])
        else:
            states[k] = propagate(states[k - 1], times[k - 1], times[k], mu, settings)
    return states, stms
