"""Solvers for subdiffusion with a time-varying order and its optimal control.

The model is u_t - D_t^{1-alpha(t)} u_xx = q + c on the unit interval with a
linearly varying order alpha(t), homogeneous Dirichlet boundary and zero
initial data, plus the tracking-type control problem that penalizes both the
distance to a target and the control energy under a nonnegative-mean
constraint.  Discretization couples an L1-type convolution quadrature in
time with linear finite elements in space; the optimizer is a projected
fixed-point sweep over the state/adjoint pair.

Layered modules: :mod:`special` (gamma, Mittag-Leffler, Jacobi rules) ->
:mod:`kernels` (discrete convolution tables) -> :mod:`fem1d` (mesh and
tridiagonal operators) -> :mod:`marching` (state/adjoint time stepping) ->
:mod:`control` (projection and fixed-point optimization) -> :mod:`harness`
(studies, oracles, CSV reports) -> :mod:`cli`.
"""

from .control import (
    ControlProblem,
    FixedPointError,
    OptimalityResult,
    control_boundary_value,
    fixed_point_optimize,
    objective_eval,
    project_control,
)
from .fem1d import (
    FemOperators,
    Mesh1D,
    SpdTriDiagFactor,
    TriDiag,
    assemble,
    factor_spd,
    interpolate,
    l2_norm_discrete,
    tridiag_solve,
)
from .harness import (
    ConvergenceReport,
    Example3Result,
    ManufacturedData,
    OracleConsistencyError,
    SeparableField,
    StudyConfig,
    constant_exponent_spatial_errors,
    constant_exponent_temporal_errors,
    example1_study,
    example2_study,
    example3_fields,
    example3_study,
    manufactured_forcing,
    ml_exact_rows,
    parse_config,
    power_kernel_integral,
    rates_from_errors,
    run_example,
    tracking_problem,
    two_mesh_spatial_error,
    two_mesh_temporal_error,
)
from .kernels import (
    DEFAULT_G_NODES,
    ExponentSpec,
    KernelTables,
    build_tables,
    default_g_rule,
    g_eval,
    history_weights,
    l1_coefficients,
    p_kernel,
)
from .marching import (
    ForcingPlan,
    discrete_frac_integral,
    solve_adjoint,
    solve_state,
)
from .special import (
    ConvergenceError,
    JacobiRule,
    MLParams,
    gamma_fn,
    jacobi_rule,
    mittag_leffler,
)

__version__ = "0.1.0"

__all__ = [
    "ControlProblem",
    "ConvergenceError",
    "ConvergenceReport",
    "DEFAULT_G_NODES",
    "Example3Result",
    "ExponentSpec",
    "FemOperators",
    "FixedPointError",
    "ForcingPlan",
    "JacobiRule",
    "KernelTables",
    "MLParams",
    "ManufacturedData",
    "Mesh1D",
    "OptimalityResult",
    "OracleConsistencyError",
    "SeparableField",
    "SpdTriDiagFactor",
    "StudyConfig",
    "TriDiag",
    "assemble",
    "build_tables",
    "constant_exponent_spatial_errors",
    "constant_exponent_temporal_errors",
    "control_boundary_value",
    "default_g_rule",
    "discrete_frac_integral",
    "example1_study",
    "example2_study",
    "example3_fields",
    "example3_study",
    "factor_spd",
    "fixed_point_optimize",
    "g_eval",
    "gamma_fn",
    "history_weights",
    "interpolate",
    "jacobi_rule",
    "l1_coefficients",
    "l2_norm_discrete",
    "manufactured_forcing",
    "ml_exact_rows",
    "mittag_leffler",
    "objective_eval",
    "p_kernel",
    "parse_config",
    "power_kernel_integral",
    "project_control",
    "rates_from_errors",
    "run_example",
    "solve_adjoint",
    "solve_state",
    "tracking_problem",
    "two_mesh_spatial_error",
    "two_mesh_temporal_error",
    "__version__",
]
