"""Exact max-min tasking by branch-and-bound over the binary schedule.

Each node solves the LP relaxation

    max t
    s.t. t - sum_{i,k} A[i,j,k] u[i,j,k] <= 0     for every target j
         sum_j u[i,j,k] <= 1                     for every (observer, step)
         lo <= u <= hi,  t >= 0

where the node's branching decisions fix entries of lo/hi. Nodes are
explored depth-first, deeper nodes first, ties broken by the larger parent
bound.

The LP runs on a unit-scaled copy of the tensor, so its objective is only as
good as the solver's tolerances allow. Pruning and the reported bound use
the weighted-sum bound instead: for target weights w on the simplex,
min_j T_j <= sum_j w_j T_j, and the weighted problem splits into one choice
per slot. Evaluated on the caller's values with the LP's dual weights it
matches the LP bound when the LP is accurate and stays valid when it is not.
"""

import heapq
import itertools
import logging
import time
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, hstack, vstack

from ..errors import SolverBudgetError
from .schedule import ControlTensor, ObjectiveKind, TaskingSolution, _values, per_target_info

logger = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-9
NODE_LIMIT = 10 ** 6


def _relaxation_matrix(values: np.ndarray):
    M, N, L = values.shape
    nvar = M * N * L
    flat = np.arange(nvar).reshape(M, N, L)
    # rows 0..N-1: -sum_{i,k} A u + t <= 0
    rows, cols, data = [], [], []
    for j in range(N):
        idx = flat[:, j, :].ravel()
        rows.extend([j] * idx.size)
        cols.extend(idx.tolist())
        data.extend((-values[:, j, :].ravel()).tolist())
    info_rows = csr_matrix((data, (rows, cols)), shape=(N, nvar))
    # rows N..N+M*L-1: one-target-per-slot
    slot_rows, slot_cols = [], []
    for i in range(M):
        for k in range(L):
            idx = flat[i, :, k]
            slot_rows.extend([i * L + k] * N)
            slot_cols.extend(idx.tolist())
    slot = csr_matrix((np.ones(len(slot_cols)), (slot_rows, slot_cols)), shape=(M * L, nvar))
    t_col = csr_matrix(np.concatenate([np.ones(N), np.zeros(M * L)])[:, None])
    A_ub = hstack([vstack([info_rows, slot]), t_col]).tocsr()
    b_ub = np.concatenate([np.zeros(N), np.ones(M * L)])
    c = np.zeros(nvar + 1)
    c[-1] = -1.0
    return c, A_ub, b_ub


def _round_schedule(values: np.ndarray, relaxed: np.ndarray) -> np.ndarray:
    """Feasible schedule from a relaxed one: keep each slot's largest entry, then
    give idle slots to whichever target is currently worst off."""
    M, N, L = values.shape
    u = np.zeros(values.shape, dtype=np.int8)
    best = np.argmax(relaxed, axis=1)
    peak = np.max(relaxed, axis=1)
    for i in range(M):
        for k in range(L):
            if peak[i, k] > INTEGRALITY_TOL:
                u[i, best[i, k], k] = 1
    totals = np.einsum("ijk,ijk->j", values, u.astype(float))
    for i in range(M):
        for k in range(L):
            if u[i, :, k].any():
                continue
            useful = values[i, :, k] > 0
            if not useful.any():
                continue
            j = int(np.argmin(np.where(useful, totals, np.inf)))
            u[i, j, k] = 1
            totals[j] += values[i, j, k]
    return u


def _weighted_bound(values: np.ndarray, weights: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    """Largest sum_j w_j T_j over schedules allowed by lo/hi; an upper bound on min_j T_j."""
    M, N, L = values.shape
    weighted = weights[None, :, None] * values
    forced = lo.reshape(M, N, L) > 0.5
    allowed = hi.reshape(M, N, L) > 0.5
    free = np.where(allowed, weighted, 0.0).max(axis=1)
    pinned = np.where(forced, weighted, 0.0).sum(axis=1)
    return float(np.where(forced.any(axis=1), pinned, free).sum())


def _dual_weights(res, N: int) -> np.ndarray:
    marginals = getattr(getattr(res, "ineqlin", None), "marginals", None)
    if marginals is None:
        return np.full(N, 1.0 / N)
    weights = np.clip(-np.asarray(marginals[:N], dtype=float), 0.0, None)
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        return np.full(N, 1.0 / N)
    return weights / total


def _close_enough(bound: float, incumbent: float, gap_tol: float) -> bool:
    return bound - incumbent <= gap_tol * max(abs(incumbent), 1e-300)


def solve_maxmin(A, gap_tol: float = 1e-9, node_limit: int = NODE_LIMIT,
                 strict: bool = False) -> TaskingSolution:
    """Schedule maximising the minimum per-target information, within gap_tol (relative).

    The reported ``bound`` and ``gap`` hold on the unscaled values. When the
    node limit is hit the best incumbent is returned with
    ``solver_stats["status"] == "node_limit"`` (or SolverBudgetError when strict).
    """
    if gap_tol < 0:
        raise ValueError("gap_tol must be non-negative")
    start = time.perf_counter()
    values = _values(A)
    M, N, L = values.shape
    nvar = M * N * L

    if N == 0 or nvar == 0:
        control = ControlTensor.zeros(values.shape)
        return TaskingSolution(control, 0.0, np.zeros(N), ObjectiveKind.MAXMIN,
                               {"status": "optimal", "nodes": 0, "iterations": 0, "bound": 0.0,
                                "gap": 0.0, "wall_time": time.perf_counter() - start})

    scale = float(values.max()) if values.max() > 0 else 1.0
    c, A_ub, b_ub = _relaxation_matrix(values / scale)
    uniform = np.full(N, 1.0 / N)
    counter = itertools.count()
    incumbent_u = _round_schedule(values, np.ones_like(values))
    incumbent = float(per_target_info(values, ControlTensor(incumbent_u)).min())

    def relax(lo: np.ndarray, hi: np.ndarray) -> Tuple[str, Optional[np.ndarray], np.ndarray, float, int]:
        bounds = np.column_stack([np.append(lo, 0.0), np.append(hi, np.inf)])
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        nit = int(getattr(res, "nit", 0) or 0)
        if res.status == 2:
            return "infeasible", None, uniform, np.inf, nit
        if res.status != 0:
            logger.warning("LP relaxation ended with status %d: %s", res.status, res.message)
            return "failed", None, uniform, np.inf, nit
        return "solved", res.x[:nvar], _dual_weights(res, N), -res.fun * scale, nit

    root_lo, root_hi = np.zeros(nvar), np.ones(nvar)
    heap = [(0, -np.inf, next(counter), root_lo, root_hi)]
    nodes = 0
    iterations = 0
    status = "optimal"
    pruned_bound = -np.inf

    while heap:
        if nodes >= node_limit:
            status = "node_limit"
            break
        neg_depth, neg_parent_bound, _, lo, hi = heapq.heappop(heap)
        parent_bound = -neg_parent_bound
        if np.isfinite(parent_bound) and _close_enough(parent_bound, incumbent, gap_tol):
            pruned_bound = max(pruned_bound, parent_bound)
            continue
        nodes += 1
        free = lo != hi
        if not free.any():
            # every entry fixed: the node is a single schedule
            fixed = lo.reshape(M, N, L).astype(np.int8)
            if fixed.sum(axis=1).max() > 1:
                continue
            value = float(per_target_info(values, ControlTensor(fixed)).min())
            if value > incumbent:
                incumbent, incumbent_u = value, fixed
            pruned_bound = max(pruned_bound, value)
            continue

        outcome, relaxed, weights, lp_bound, nit = relax(lo, hi)
        iterations += nit
        if outcome == "infeasible":
            continue
        bound = _weighted_bound(values, weights, lo, hi)
        if not _close_enough(bound, lp_bound, gap_tol):
            logger.debug("node %d: LP bound %.12g is below the weighted bound %.12g", nodes, lp_bound, bound)
        if np.isfinite(parent_bound):
            bound = min(bound, parent_bound)
        if _close_enough(bound, incumbent, gap_tol):
            pruned_bound = max(pruned_bound, bound)
            continue

        if relaxed is not None:
            candidate = _round_schedule(values, relaxed.reshape(M, N, L))
            value = float(per_target_info(values, ControlTensor(candidate)).min())
            if value > incumbent:
                incumbent, incumbent_u = value, candidate
                logger.debug("node %d: new incumbent %.12g (bound %.12g)", nodes, incumbent, bound)
            if _close_enough(bound, incumbent, gap_tol):
                pruned_bound = max(pruned_bound, bound)
                continue
            # most fractional free variable; argmin picks the lowest flat (observer, target, step) index
            var = int(np.argmin(np.where(free, np.abs(relaxed - 0.5), np.inf)))
        else:
            var = int(np.argmax(free))

        depth = -neg_depth + 1
        down_hi = hi.copy()
        down_hi[var] = 0.0
        up_lo = lo.copy()
        up_lo[var] = 1.0
        heapq.heappush(heap, (-depth, -bound, next(counter), up_lo, hi))
        heapq.heappush(heap, (-depth, -bound, next(counter), lo, down_hi))

    open_bounds = [-entry[1] for entry in heap if np.isfinite(entry[1])]
    if status == "node_limit" and any(not np.isfinite(entry[1]) for entry in heap):
        open_bounds.append(_weighted_bound(values, uniform, root_lo, root_hi))
    global_bound = max([incumbent, pruned_bound] + open_bounds)
    gap = (global_bound - incumbent) / incumbent if incumbent > 0 else (0.0 if global_bound <= 0 else np.inf)
    stats = {
        "status": status,
        "nodes": nodes,
        "iterations": iterations,
        "bound": float(global_bound),
        "gap": float(gap),
        "wall_time": time.perf_counter() - start,
    }
    if status == "node_limit":
        logger.warning("branch-and-bound hit the node limit (%d): incumbent %.6g, bound %.6g",
                       node_limit, incumbent, global_bound)
        if strict:
            raise SolverBudgetError(incumbent, global_bound, nodes)

    control = ControlTensor(incumbent_u)
    totals = per_target_info(values, control)
    return TaskingSolution(control, float(totals.min()), totals, ObjectiveKind.MAXMIN, stats)
