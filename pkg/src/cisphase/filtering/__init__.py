from .ekf import (
    BeliefHistory,
    TargetBelief,
    accumulated_information,
    information_identity_residual,
    predict,
    run_schedule,
    update,
)
