"""Angles-only line-of-sight measurement model and per-observation information."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import CloseApproachError, NonInvertibleNoiseError

CLOSE_APPROACH_MODES = ("error", "clamp")


@dataclass(frozen=True)
class MeasurementModel:
    """Unit line-of-sight measurement with isotropic noise R = sigma^2 I3."""

    sigma: float = 1e-5
    rho_floor: float = 1e-6
    close_approach: str = "error"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be strictly positive")
        if self.rho_floor < 0:
            raise ValueError("rho_floor must be non-negative")
        if self.close_approach not in CLOSE_APPROACH_MODES:
            raise ValueError(f"close_approach must be one of {CLOSE_APPROACH_MODES}")

    @property
    def clamp(self) -> bool:
        return self.close_approach == "clamp"

    @property
    def noise(self) -> np.ndarray:
        return self.sigma ** 2 * np.eye(3)

    @classmethod
    def from_config(cls, config: dict) -> "MeasurementModel":
        return cls(
            sigma=config.get("SIGMA", 1e-5),
            rho_floor=config.get("RHO_FLOOR", 1e-6),
            close_approach=config.get("CLOSE_APPROACH", "error"),
        )


def _separation(observer_pos, target_pos, rho_floor: float, clamp: bool):
    rel = np.asarray(target_pos, dtype=float)[:3] - np.asarray(observer_pos, dtype=float)[:3]
    rho = float(np.linalg.norm(rel))
    if rho <= rho_floor:
        if not clamp:
            raise CloseApproachError(rho, rho_floor)
        direction = rel / rho if rho > 0 else np.zeros(3)
        return direction, max(rho, rho_floor)
    return rel / rho, rho


def los_measurement(observer_pos, target_pos, rho_floor: float = 0.0) -> np.ndarray:
    """Unit vector from observer to target."""
    direction, _ = _separation(observer_pos, target_pos, rho_floor, clamp=False)
    return direction


def observation_jacobian(observer_pos, target_pos, rho_floor: float = 0.0,
                         clamp: bool = False) -> np.ndarray:
    """3x6 partial of the line-of-sight unit vector with respect to the target state.

    H = [(I - u u^T) / rho, 0]. In clamp mode rho is replaced by
    max(rho, rho_floor).
    """
    u, rho = _separation(observer_pos, target_pos, rho_floor, clamp)
    jac = np.zeros((3, 6))
    jac[:, :3] = (np.eye(3) - np.outer(u, u)) / rho
    return jac


def _noise_factor(noise: np.ndarray):
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (3, 3) or not np.allclose(noise, noise.T, rtol=0, atol=1e-14 * np.abs(noise).max()):
        raise NonInvertibleNoiseError("measurement noise must be a symmetric 3x3 matrix")
    try:
        return cho_factor(noise)
    except LinAlgError as e:
        raise NonInvertibleNoiseError(f"measurement noise is not positive definite: {e}") from e


def info_matrix(jac: np.ndarray, noise: np.ndarray, stm: np.ndarray) -> np.ndarray:
    """Phi^T H^T R^-1 H Phi for one observation.

    ``stm`` is Phi(t_k, t_L): the map from terminal-epoch perturbations back to
    the observation epoch, so the result is information about the terminal
    state.
    """
    factor = _noise_factor(noise)
    mapped = np.asarray(jac) @ np.asarray(stm)
    info = mapped.T @ cho_solve(factor, mapped)
    return 0.5 * (info + info.T)
