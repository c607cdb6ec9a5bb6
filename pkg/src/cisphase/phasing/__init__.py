from .landscape import (
    BudgetRow,
    Sweep,
    SweepRow,
    argmax_phases,
    budget_sweep,
    contour_grid,
    local_maxima,
    phase_grid,
    separability_study,
    sweep_phase,
)
from .objective import BilevelObjective, Evaluation, evaluate, numerical_gradient
from .search import (
    OptimizeResult,
    SearchSettings,
    exhaustive_search,
    greedy_search,
    local_optimize,
    multi_start,
    start_points,
)
