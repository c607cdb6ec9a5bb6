"""Phase search strategies: local quasi-Newton ascent, multi-start, greedy and exhaustive."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from ..catalog.orbits import wrap_phase
from ..errors import CisphaseError, OptimizationError
from ..observation.tensor import TaskingEnvironment
from ..tasking import ObjectiveKind
from ..tasking.schedule import ControlTensor
from .objective import BilevelObjective, numerical_gradient

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchSettings:
    gradient_step: float = 1e-6
    max_iter: int = 500
    grad_tol: float = 1e-8
    f_tol: float = 1e-10
    starts: int = 1
    seed: int = 0
    workers: int = 1
    gap_tol: float = 1e-9
    node_limit: int = 10 ** 6

    @classmethod
    def from_config(cls, config: dict) -> "SearchSettings":
        return cls(
            gradient_step=config.get("GRADIENT_STEP", 1e-6),
            max_iter=config.get("MAX_ITER", 500),
            grad_tol=config.get("GRAD_TOL", 1e-8),
            f_tol=config.get("F_TOL", 1e-10),
            starts=config.get("STARTS", 1),
            seed=config.get("SEED", 0),
            workers=config.get("WORKERS", 1),
            gap_tol=config.get("GAP_TOL", 1e-9),
            node_limit=config.get("NODE_LIMIT", 10 ** 6),
        )


@dataclass
class OptimizeResult:
    """Outcome of a phase search. ``wall_time`` is reported in the run report, never in a CSV."""

    x_star: np.ndarray
    objective: float
    log_objective: float
    control: Optional[ControlTensor]
    wall_time: float
    evaluations: int
    starts: List[Dict[str, Any]] = field(default_factory=list)
    method: str = "local"
    kind: ObjectiveKind = ObjectiveKind.MAX
    heuristic: bool = False
    solver_status: str = "optimal"


class _NonFiniteObjective(Exception):
    pass


def natural_log(value: float) -> float:
    return math.log(value) if value > 0 else -math.inf


def _wrap_all(x) -> np.ndarray:
    return np.array([wrap_phase(v) for v in np.atleast_1d(np.asarray(x, dtype=float))])


def local_optimize(obj: BilevelObjective, x0: Sequence[float],
                   settings: SearchSettings = SearchSettings()) -> OptimizeResult:
    """Bounded quasi-Newton (L-BFGS-B) ascent from x0 with central-difference gradients.

    L-BFGS-B minimises -f(x) / |f(x0)|, so ``f_tol`` is a relative decrease
    of the objective itself. The returned objective is never below the
    objective at x0. ``evaluations`` counts this call's evaluations only.
    """
    start = time.perf_counter()
    x0 = _wrap_all(x0) if obj.dimension else np.zeros(0)
    if obj.dimension == 0:
        evaluation = obj.solve_at(x0)
        return OptimizeResult(x0, evaluation.objective, natural_log(evaluation.objective),
                              evaluation.solution.control, time.perf_counter() - start, 1)

    cache: Dict[tuple, float] = {}
    calls = 0

    def f(x) -> float:
        nonlocal calls
        key = tuple(_wrap_all(x))
        if key not in cache:
            calls += 1
            value = obj.evaluate(x)
            if not np.isfinite(value):
                raise _NonFiniteObjective(f"objective is {value} at phases {list(key)}")
            cache[key] = value
        return cache[key]

    history: List[float] = []
    scale = 1.0

    def neg(x):
        return -f(x) / scale

    def neg_grad(x):
        return -numerical_gradient(obj, x, settings.gradient_step, f=f) / scale

    def record(xk):
        history.append(f(xk))

    try:
        f0 = f(x0)
        scale = abs(f0) if f0 != 0 else 1.0
        history.append(f0)
        res = minimize(
            neg,
            x0,
            jac=neg_grad,
            method="L-BFGS-B",
            bounds=[(0.0, 1.0)] * obj.dimension,
            callback=record,
            options={"maxiter": settings.max_iter, "gtol": settings.grad_tol, "ftol": settings.f_tol},
        )
    except (_NonFiniteObjective, CisphaseError) as e:
        raise OptimizationError(f"start aborted: {e}",
                                [{"x0": x0.tolist(), "error": str(e), "evaluations": calls}]) from e

    x_star = _wrap_all(res.x)
    if f(x_star) < f0:
        x_star = x0
    evaluation = obj.solve_at(x_star)
    calls += 1
    logger.info("local search from %s: f=%.10g after %d iterations (%s)",
                np.round(x0, 6).tolist(), evaluation.objective, res.nit, res.message)
    record_ = {
        "x0": x0.tolist(),
        "x_star": x_star.tolist(),
        "objective": evaluation.objective,
        "iterations": int(res.nit),
        "message": str(res.message),
        "history": history,
        "evaluations": calls,
        "error": None,
    }
    return OptimizeResult(
        x_star=x_star,
        objective=evaluation.objective,
        log_objective=natural_log(evaluation.objective),
        control=evaluation.solution.control,
        wall_time=time.perf_counter() - start,
        evaluations=calls,
        starts=[record_],
        kind=obj.kind,
        solver_status=evaluation.solution.solver_stats.get("status", "optimal"),
    )


def start_points(dimension: int, count: int, x0: Optional[Sequence[float]] = None,
                 seed: int = 0) -> np.ndarray:
    """(count, dimension) starting phases: x0 (or the 0.5 midpoint) then scrambled Sobol points."""
    if count < 1:
        raise ValueError("at least one start is required")
    first = np.full(dimension, 0.5) if x0 is None else _wrap_all(x0)
    if first.size != dimension:
        raise ValueError(f"x0 has {first.size} entries, expected {dimension}")
    if count == 1 or dimension == 0:
        return np.tile(first, (count, 1))
    sampler = qmc.Sobol(d=dimension, scramble=True, seed=seed)
    extra = sampler.random_base2(m=max(0, math.ceil(math.log2(count - 1))))[: count - 1]
    return np.vstack([first, extra])


def multi_start(obj: BilevelObjective, starts: Union[int, Sequence[Sequence[float]]],
                settings: SearchSettings = SearchSettings(), x0: Optional[Sequence[float]] = None) -> OptimizeResult:
    """Best of several local searches; failed starts are recorded, not fatal unless all fail.

    ``starts`` is either explicit start phases or a count (x0 plus Sobol points).
    """
    t0 = time.perf_counter()
    if isinstance(starts, (int, np.integer)):
        points = start_points(obj.dimension, int(starts), x0, settings.seed)
    else:
        points = np.atleast_2d(np.asarray(starts, dtype=float))
        if points.shape[0] < 1:
            raise ValueError("at least one start is required")

    def run(point):
        try:
            return local_optimize(obj, point, settings)
        except (OptimizationError, CisphaseError) as e:
            logger.warning("start %s failed: %s", np.round(point, 6).tolist(), e)
            return e

    if settings.workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            outcomes = list(pool.map(run, points))
    else:
        outcomes = [run(p) for p in points]

    records: List[Dict[str, Any]] = []
    best: Optional[OptimizeResult] = None
    evaluations = 0
    for index, (point, outcome) in enumerate(zip(points, outcomes)):
        if isinstance(outcome, Exception):
            spent = sum(d.get("evaluations", 0) for d in getattr(outcome, "diagnostics", []))
            evaluations += spent
            records.append({"start": index, "x0": np.asarray(point).tolist(), "x_star": None,
                            "objective": None, "iterations": 0, "evaluations": spent,
                            "error": str(outcome)})
            continue
        evaluations += outcome.evaluations
        rec = dict(outcome.starts[0])
        rec["start"] = index
        records.append(rec)
        # strict comparison keeps the lowest start index on ties
        if best is None or outcome.objective > best.objective:
            best = outcome
    if best is None:
        raise OptimizationError("every start failed", records)

    return OptimizeResult(
        x_star=best.x_star,
        objective=best.objective,
        log_objective=best.log_objective,
        control=best.control,
        wall_time=time.perf_counter() - t0,
        evaluations=evaluations,
        starts=records,
        method="multi-start",
        kind=obj.kind,
        solver_status=best.solver_status,
    )


def exhaustive_search(env: TaskingEnvironment, kind=ObjectiveKind.MAX,
                      x0: Optional[Sequence[float]] = None,
                      settings: SearchSettings = SearchSettings()) -> OptimizeResult:
    """Joint search over all observer phases at once."""
    t0 = time.perf_counter()
    obj = BilevelObjective(env, kind, settings.gap_tol, settings.node_limit)
    points = start_points(env.num_observers, settings.starts, x0, settings.seed)
    result = multi_start(obj, points, settings)
    result.method = "exhaustive"
    result.wall_time = time.perf_counter() - t0
    return result


def greedy_search(env: TaskingEnvironment, kind=ObjectiveKind.MAX,
                  x0: Optional[Sequence[float]] = None,
                  settings: SearchSettings = SearchSettings()) -> OptimizeResult:
    """Optimise each observer's phase alone (all other observers removed), then solve jointly.

    Exact for the max objective. For maxmin the result is a heuristic and is
    flagged as such.
    """
    kind = ObjectiveKind(kind)
    t0 = time.perf_counter()
    heuristic = kind is ObjectiveKind.MAXMIN
    if heuristic:
        logger.warning("greedy decomposition is not exact for the maxmin objective; result is heuristic")
    points = start_points(env.num_observers, settings.starts, x0, settings.seed)
    x_star = np.zeros(env.num_observers)
    evaluations = 0
    records: List[Dict[str, Any]] = []
    for i in range(env.num_observers):
        single = BilevelObjective(env.with_observers([i]), kind, settings.gap_tol, settings.node_limit)
        partial = multi_start(single, points[:, i:i + 1], settings)
        x_star[i] = partial.x_star[0]
        evaluations += partial.evaluations
        for rec in partial.starts:
            records.append(dict(rec, observer=i))

    joint = BilevelObjective(env, kind, settings.gap_tol, settings.node_limit)
    evaluation = joint.solve_at(x_star)
    return OptimizeResult(
        x_star=evaluation.phases,
        objective=evaluation.objective,
        log_objective=natural_log(evaluation.objective),
        control=evaluation.solution.control,
        wall_time=time.perf_counter() - t0,
        evaluations=evaluations + joint.evaluations,
        starts=records,
        method="greedy",
        kind=kind,
        heuristic=heuristic,
        solver_status=evaluation.solution.solver_stats.get("status", "optimal"),
    )
