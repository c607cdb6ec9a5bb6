"""Libration points and a single-shooting corrector for planar symmetric orbits.

Used to build catalog entries for tests and demos. Lyapunov orbits are reached
by natural-parameter continuation in amplitude from a small linear seed.
"""

import logging
from typing import Dict, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ..dynamics.cr3bp import check_mass_ratio, eom, eom_jacobian, potential_gradient, potential_hessian
from ..dynamics.propagation import DEFAULT_SETTINGS, PropagationSettings
from ..errors import PropagationError
from .orbits import OrbitSpec

logger = logging.getLogger(__name__)

CONTINUATION_STEP = 0.002


def _ux_on_axis(x: float, mu: float) -> float:
    return potential_gradient(np.array([x, 0.0, 0.0]), mu)[0]


def libration_points(mu: float) -> Dict[str, np.ndarray]:
    """Positions of L1..L5. Collinear points come from bracketed root finds of dU/dx."""
    mu = check_mass_ratio(mu)
    eps = 1e-9
    l1 = brentq(_ux_on_axis, -mu + eps, 1.0 - mu - eps, args=(mu,), xtol=1e-15)
    l2 = brentq(_ux_on_axis, 1.0 - mu + eps, 2.0, args=(mu,), xtol=1e-15)
    l3 = brentq(_ux_on_axis, -2.0, -mu - eps, args=(mu,), xtol=1e-15)
    h = np.sqrt(3.0) / 2.0
    return {
        "L1": np.array([l1, 0.0, 0.0]),
        "L2": np.array([l2, 0.0, 0.0]),
        "L3": np.array([l3, 0.0, 0.0]),
        "L4": np.array([0.5 - mu, h, 0.0]),
        "L5": np.array([0.5 - mu, -h, 0.0]),
    }


def linear_lyapunov_guess(mu: float, point: str, amplitude: float) -> Tuple[float, float, float]:
    """(x0, vy0, period) of the linearized planar Lyapunov orbit about a collinear point.

    The orbit starts on the x-axis at xL + amplitude with zero x-velocity.
    """
    xl = libration_points(mu)[point]
    hess = potential_hessian(xl, mu)
    uxx = hess[0, 0]
    # uxx = 1 + 2 c2 at a collinear point
    c2 = (uxx - 1.0) / 2.0
    omega = np.sqrt((2.0 - c2 + np.sqrt(9.0 * c2 ** 2 - 8.0 * c2)) / 2.0)
    k = (omega ** 2 + uxx) / (2.0 * omega)
    return xl[0] + amplitude, -k * omega * amplitude, 2.0 * np.pi / omega


def _half_period_crossing(x0: float, vy0: float, mu: float, t_max: float,
                          settings: PropagationSettings):
    def rhs(t, y):
        phi = y[6:].reshape(6, 6)
        return np.concatenate([eom(y[:6], mu), (eom_jacobian(y[:6], mu) @ phi).ravel()])

    def crossing(t, y):
        return y[1]

    crossing.terminal = True
    crossing.direction = -np.sign(vy0)

    y0 = np.concatenate([[x0, 0.0, 0.0, 0.0, vy0, 0.0], np.eye(6).ravel()])
    sol = solve_ivp(rhs, (0.0, t_max), y0, method="DOP853", events=crossing,
                    rtol=settings.rel_tol, atol=settings.abs_tol)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise PropagationError("no x-axis crossing found before t_max")
    return sol.t_events[0][0], sol.y_events[0][0]


def correct_planar_orbit(mu: float, x0: float, vy0: float, orbit_id: str, family: str,
                         tol: float = 1e-11, max_iter: int = 25, t_max: float = 4.0 * np.pi,
                         settings: PropagationSettings = DEFAULT_SETTINGS) -> OrbitSpec:
    """Newton iteration on vy0 until the half-period x-axis crossing is perpendicular.

    Applies to any orbit symmetric about the x-axis (planar Lyapunov,
    distant retrograde). Returns the closed orbit as an OrbitSpec.
    """
    mu = check_mass_ratio(mu)
    for iteration in range(max_iter):
        t_half, y_half = _half_period_crossing(x0, vy0, mu, t_max, settings)
        state = y_half[:6]
        vx = state[3]
        logger.debug("corrector iteration %d: vx at crossing = %.3e", iteration, vx)
        if abs(vx) < tol:
            return OrbitSpec(orbit_id, family, mu, np.array([x0, 0.0, 0.0, 0.0, vy0, 0.0]), 2.0 * t_half)
        phi = y_half[6:].reshape(6, 6)
        accel = eom(state, mu)
        # Sensitivity of vx at the crossing, accounting for the shift in crossing time.
        dvx = phi[3, 4] - accel[3] / state[4] * phi[1, 4]
        vy0 -= vx / dvx
    raise PropagationError(f"corrector for '{orbit_id}' did not converge in {max_iter} iterations")


def _amplitude_ladder(amplitude: float, step: float) -> np.ndarray:
    count = max(1, int(np.ceil(amplitude / step - 1e-9)))
    return amplitude * np.arange(1, count + 1) / count


def lyapunov_orbit(mu: float, point: str, amplitude: float, orbit_id: str = None,
                   step: float = CONTINUATION_STEP,
                   settings: PropagationSettings = DEFAULT_SETTINGS) -> OrbitSpec:
    """Corrected planar Lyapunov orbit about L1 or L2 with the given x-amplitude.

    The linear guess is only trusted at amplitudes up to ``step``. Larger
    orbits are reached by stepping the amplitude up, seeding each correction
    from the converged neighbours (secant in vy0) and the previous period.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be strictly positive")
    if step <= 0:
        raise ValueError("continuation step must be strictly positive")
    xl = libration_points(mu)[point][0]
    orbit_id = orbit_id or f"{point.lower()}-lyapunov-{amplitude:g}"
    _, _, period = linear_lyapunov_guess(mu, point, min(amplitude, step))

    solved = []
    orbit = None
    for current in _amplitude_ladder(amplitude, step):
        if len(solved) >= 2:
            (a1, v1), (a2, v2) = solved[-2:]
            vy0 = v2 + (v2 - v1) * (current - a2) / (a2 - a1)
        elif solved:
            a1, v1 = solved[-1]
            vy0 = v1 * current / a1
        else:
            vy0 = linear_lyapunov_guess(mu, point, current)[1]
        orbit = correct_planar_orbit(mu, xl + current, vy0, orbit_id, "lyapunov",
                                     t_max=1.5 * period, settings=settings)
        solved.append((current, orbit.initial_state[4]))
        period = orbit.period
        logger.debug("lyapunov continuation at amplitude %.4g: period %.6f", current, period)
    return orbit
