from .cr3bp import (
    SINGULARITY_FLOOR,
    as_state,
    check_mass_ratio,
    effective_potential,
    eom,
    eom_jacobian,
    jacobi_constant,
    potential_gradient,
    potential_hessian,
    primary_distances,
)
from .propagation import (
    DEFAULT_SETTINGS,
    PropagationSettings,
    propagate,
    propagate_sequence,
    propagate_with_stm,
)
