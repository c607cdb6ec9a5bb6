"""Exception types raised across the cisphase pipeline."""

from typing import Any, Dict, List, Optional


class CisphaseError(Exception):
    """Base class for every error raised by cisphase."""


class SingularPositionError(CisphaseError, ValueError):
    """A position sits on (or numerically at) one of the primaries."""

    def __init__(self, r1: float, r2: float, floor: float):
        self.r1 = r1
        self.r2 = r2
        self.floor = floor
        super().__init__(
            f"Position too close to a primary: r1={r1:.3e}, r2={r2:.3e} (floor {floor:.1e})"
        )


class PropagationError(CisphaseError, RuntimeError):
    """The integrator failed (step-size underflow or a non-finite state)."""

    def __init__(self, message: str, observer: Optional[int] = None):
        self.observer = observer
        if observer is not None:
            message = f"observer {observer}: {message}"
        super().__init__(message)


class CatalogParseError(CisphaseError, ValueError):
    """A catalog row could not be parsed."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"catalog row {row}: {message}")


class ClosureError(CisphaseError, ValueError):
    """A catalog orbit does not return to its initial state after one period."""

    def __init__(self, orbit_id: str, residual: float, tolerance: float):
        self.orbit_id = orbit_id
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"orbit '{orbit_id}' fails closure: residual {residual:.3e} > {tolerance:.1e}"
        )


class CloseApproachError(CisphaseError, ValueError):
    """Observer-target separation at or below the configured floor."""

    def __init__(
        self,
        separation: float,
        floor: float,
        observer: Optional[int] = None,
        target: Optional[int] = None,
        step: Optional[int] = None,
    ):
        self.separation = separation
        self.floor = floor
        self.observer = observer
        self.target = target
        self.step = step
        where = ""
        if observer is not None:
            where = f" (observer {observer}, target {target}, step {step})"
        super().__init__(f"close approach: separation {separation:.3e} <= {floor:.1e}{where}")


class InfeasibleControlError(CisphaseError, ValueError):
    """A schedule assigns more than one target to an observer at a step."""

    def __init__(self, observer: int, step: int, message: str = ""):
        self.observer = observer
        self.step = step
        super().__init__(
            message or f"observer {observer} is tasked to more than one target at step {step}"
        )


class NonInvertibleNoiseError(CisphaseError, ValueError):
    """The measurement noise matrix is not symmetric positive definite."""


class NonPositiveObjectiveError(CisphaseError, ValueError):
    """An optimal objective used as a denominator is not strictly positive."""


class ScenarioError(CisphaseError, ValueError):
    """A scenario file is malformed or references unknown orbits."""


class SolverBudgetError(CisphaseError, RuntimeError):
    """Branch-and-bound stopped at its node limit before closing the gap."""

    def __init__(self, incumbent: float, bound: float, nodes: int):
        self.incumbent = incumbent
        self.bound = bound
        self.nodes = nodes
        super().__init__(
            f"node limit reached after {nodes} nodes: incumbent {incumbent:.6g}, bound {bound:.6g}"
        )


class OptimizationError(CisphaseError, RuntimeError):
    """Every start of a phase optimization failed."""

    def __init__(self, message: str, diagnostics: Optional[List[Dict[str, Any]]] = None):
        self.diagnostics = diagnostics or []
        super().__init__(message)
