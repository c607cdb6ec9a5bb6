from .corrector import correct_planar_orbit, libration_points, linear_lyapunov_guess, lyapunov_orbit
from .orbits import (
    CATALOG_HEADER,
    CLOSURE_TOL,
    OrbitSpec,
    TimeGrid,
    index_catalog,
    load_catalog,
    phase_to_state,
    sample_trajectory,
    wrap_phase,
    write_catalog,
)
