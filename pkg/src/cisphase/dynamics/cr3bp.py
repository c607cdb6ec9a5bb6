"""Rotating-frame equations of motion for the circular restricted three-body problem.

All quantities are in canonical nondimensional units: the primaries sit at
(-mu, 0, 0) and (1 - mu, 0, 0), their separation is 1 and the frame rotates
at unit rate.
"""

from typing import Tuple

import numpy as np

from ..errors import SingularPositionError

# Minimum distance to either primary before a position is treated as singular.
SINGULARITY_FLOOR = 1e-12

StateVector = np.ndarray


def check_mass_ratio(mu: float) -> float:
    """Return mu as a float, rejecting values outside (0, 0.5]."""
    mu = float(mu)
    if not (0.0 < mu <= 0.5):
        raise ValueError(f"mass ratio must lie in (0, 0.5], got {mu}")
    return mu


def as_state(state) -> StateVector:
    """Coerce to a finite 6-vector of floats."""
    arr = np.asarray(state, dtype=float)
    if arr.shape != (6,):
        raise ValueError(f"state must have 6 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state has non-finite components")
    return arr


def primary_distances(pos, mu: float, floor: float = SINGULARITY_FLOOR) -> Tuple[float, float]:
    """Distances (r1, r2) from pos to the larger and smaller primary."""
    x, y, z = pos[0], pos[1], pos[2]
    r1 = float(np.sqrt((x + mu) ** 2 + y ** 2 + z ** 2))
    r2 = float(np.sqrt((x - 1.0 + mu) ** 2 + y ** 2 + z ** 2))
    if r1 < floor or r2 < floor:
        raise SingularPositionError(r1, r2, floor)
    return r1, r2


def effective_potential(pos, mu: float, floor: float = SINGULARITY_FLOOR) -> float:
    """U = (x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2."""
    r1, r2 = primary_distances(pos, mu, floor)
    return 0.5 * (pos[0] ** 2 + pos[1] ** 2) + (1.0 - mu) / r1 + mu / r2


def potential_gradient(pos, mu: float, floor: float = SINGULARITY_FLOOR) -> np.ndarray:
    """Analytic partials (Ux, Uy, Uz) of the effective potential."""
    x, y, z = pos[0], pos[1], pos[2]
    r1, r2 = primary_distances(pos, mu, floor)
    mu1 = 1.0 - mu
    c1 = mu1 / r1 ** 3
    c2 = mu / r2 ** 3
    return np.array([
        x - c1 * (x + mu) - c2 * (x - mu1),
        y - c1 * y - c2 * y,
        -c1 * z - c2 * z,
    ])


def potential_hessian(pos, mu: float, floor: float = SINGULARITY_FLOOR) -> np.ndarray:
    """Second partials of U, the 3x3 block feeding the variational equations."""
    r1, r2 = primary_distances(pos, mu, floor)
    mu1 = 1.0 - mu
    d1 = np.array([pos[0] + mu, pos[1], pos[2]])
    d2 = np.array([pos[0] - mu1, pos[1], pos[2]])
    hess = np.diag([1.0, 1.0, 0.0])
    hess -= mu1 * (np.eye(3) / r1 ** 3 - 3.0 * np.outer(d1, d1) / r1 ** 5)
    hess -= mu * (np.eye(3) / r2 ** 3 - 3.0 * np.outer(d2, d2) / r2 ** 5)
    return hess


def eom(state, mu: float, floor: float = SINGULARITY_FLOOR) -> np.ndarray:
    """Time derivative (vx, vy, vz, ax, ay, az) of a rotating-frame state."""
    grad = potential_gradient(state[:3], mu, floor)
    vx, vy, vz = state[3], state[4], state[5]
    return np.array([
        vx,
        vy,
        vz,
        2.0 * vy + grad[0],
        -2.0 * vx + grad[1],
        grad[2],
    ])


def eom_jacobian(state, mu: float, floor: float = SINGULARITY_FLOOR) -> np.ndarray:
    """6x6 partial of eom with respect to the state."""
    jac = np.zeros((6, 6))
    jac[:3, 3:] = np.eye(3)
    jac[3:, :3] = potential_hessian(state[:3], mu, floor)
    jac[3, 4] = 2.0
    jac[4, 3] = -2.0
    return jac


def jacobi_constant(state, mu: float, floor: float = SINGULARITY_FLOOR) -> float:
    """C = 2U - v^2."""
    v2 = state[3] ** 2 + state[4] ** 2 + state[5] ** 2
    return 2.0 * effective_potential(state[:3], mu, floor) - v2
