"""Matrix-free data-driven predictive control.

Builds quadratic optimal control problems directly from recorded
trajectories of a linear system and solves them with FFT-accelerated
operators: no Hankel matrix is ever materialized, so memory stays linear in
the data length.
"""

from .lti import (
    LtiSystem,
    Setpoint,
    Trajectory,
    equilibrium_setpoint,
    generate_excitation,
    generate_system,
    is_persistently_exciting,
    simulate,
)
from .problem import (
    AlState,
    DeepcProblem,
    al_gradient,
    al_hessian_matvec,
    al_value,
    assemble_problem,
    kkt_residual,
    min_data_length,
    p_matvec,
    pt_matvec,
    recovered_trajectory,
    s_matvec,
    tracking_linear_term,
)
from .solvers import (
    AlConfig,
    DegenerateCurvatureError,
    LbfgsConfig,
    LbfgsMemory,
    SolveReport,
    exact_line_search,
    lbfgs_minimize,
    solve_al_gd,
    solve_al_lbfgs,
    solve_dense_kkt,
    solve_minres_kkt,
    two_loop_apply,
)
from .spectral import (
    DftProvider,
    SpectralHankelOperator,
    build_operator,
    dense_hankel,
    hankel_matvec,
    hankel_rmatvec,
    next_smooth_length,
)

__all__ = [
    "AlConfig",
    "AlState",
    "DeepcProblem",
    "DegenerateCurvatureError",
    "DftProvider",
    "LbfgsConfig",
    "LbfgsMemory",
    "LtiSystem",
    "Setpoint",
    "SolveReport",
    "SpectralHankelOperator",
    "Trajectory",
    "al_gradient",
    "al_hessian_matvec",
    "al_value",
    "assemble_problem",
    "build_operator",
    "dense_hankel",
    "equilibrium_setpoint",
    "exact_line_search",
    "generate_excitation",
    "generate_system",
    "hankel_matvec",
    "hankel_rmatvec",
    "is_persistently_exciting",
    "kkt_residual",
    "lbfgs_minimize",
    "min_data_length",
    "next_smooth_length",
    "p_matvec",
    "pt_matvec",
    "recovered_trajectory",
    "s_matvec",
    "simulate",
    "solve_al_gd",
    "solve_al_lbfgs",
    "solve_dense_kkt",
    "solve_minres_kkt",
    "tracking_linear_term",
    "two_loop_apply",
]
