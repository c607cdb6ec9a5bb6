from .branch_bound import solve_maxmin
from .schedule import (
    ControlTensor,
    ObjectiveKind,
    TaskingSolution,
    control_difference,
    evaluate_control,
    myopic_policy,
    observation_budget,
    per_target_info,
    relative_optimality_gap,
    solve_max,
)


def solve(A, kind, gap_tol: float = 1e-9, node_limit: int = 10 ** 6) -> TaskingSolution:
    """Dispatch to the lower-level solver matching the objective kind."""
    if ObjectiveKind(kind) is ObjectiveKind.MAX:
        return solve_max(A)
    return solve_maxmin(A, gap_tol=gap_tol, node_limit=node_limit)
