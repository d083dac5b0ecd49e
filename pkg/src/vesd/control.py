"""Discrete first-order optimality system: projection and fixed-point loop.

The admissible set constrains each time slice of the control to a
nonnegative spatial mean; the optimality condition projects the adjoint
state through

    C^n = (1/kappa) * max{0, mean(Z^n)} - Z^n / kappa,

where mean(.) is the trapezoidal integral of the piecewise-linear extension
over (0, 1) (so |Omega| = 1 and the zero boundary values participate).  The
projected control itself carries the constant boundary value
max{0, mean}/kappa - the control has no boundary condition - which is what
makes its own trapezoidal integral exactly max{0, mean} - mean >= 0.

The optimizer alternates state solve, adjoint solve, and projection from
C = 0 until the space-time sup norm of the control update drops below tol.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fem1d import FemOperators, Mesh1D, NodalVector
from .kernels import DEFAULT_G_NODES, ExponentSpec, build_tables, default_g_rule
from .marching import ForcingPlan, Trajectory, solve_adjoint, solve_state

__all__ = [
    "ControlProblem",
    "FixedPointError",
    "OptimalityResult",
    "control_boundary_value",
    "fixed_point_optimize",
    "objective_eval",
    "project_control",
]


class FixedPointError(RuntimeError):
    """Fixed-point iteration exhausted its budget; carries the last residual."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Data of one tracking problem on the unit interval.

    q_samples has one row per step (N, M-1) with row j-1 sampling q at t_j;
    ud_samples carries the target at every level t_0..t_N ((N+1) rows: the
    adjoint consumes levels 0..N-1 through time reversal, the objective's
    trapezoid consumes them all).  The optional boundary arrays carry the
    same quantities' values at x = 0 and x = 1 (row-aligned), for data that
    do not vanish on the boundary.
    """

    spec: ExponentSpec
    N: int
    M: int
    kappa: float
    q_samples: np.ndarray
    ud_samples: np.ndarray
    q_boundary: np.ndarray | None = None
    ud_boundary: np.ndarray | None = None
    tol: float = 1e-6
    max_iters: int = 500
    quad_nodes: int = DEFAULT_G_NODES

    def __post_init__(self) -> None:
        if self.kappa <= 0.0:
            raise ValueError(f"ControlProblem requires kappa > 0, got {self.kappa}")
        if self.tol <= 0.0 or self.max_iters < 1:
            raise ValueError("ControlProblem requires tol > 0 and max_iters >= 1")
        m = self.M - 1
        if self.q_samples.shape != (self.N, m):
            raise ValueError(
                f"q_samples has shape {self.q_samples.shape}, expected {(self.N, m)}"
            )
        if self.ud_samples.shape != (self.N + 1, m):
            raise ValueError(
                f"ud_samples has shape {self.ud_samples.shape}, "
                f"expected {(self.N + 1, m)}"
            )
        if self.q_boundary is not None and self.q_boundary.shape != (self.N, 2):
            raise ValueError("q_boundary must have shape (N, 2)")
        if self.ud_boundary is not None and self.ud_boundary.shape != (
            self.N + 1,
            2,
        ):
            raise ValueError("ud_boundary must have shape (N+1, 2)")


@dataclass(frozen=True, eq=False)
class OptimalityResult:
    """Converged optimality system.

    C holds the N control rows (indices 0..N-1; row n drives step n+1); U
    and Z are the state/adjoint trajectories of the final iteration, and
    residual is the last sup-norm control update.
    """

    U: Trajectory
    Z: Trajectory
    C: np.ndarray
    iterations: int
    residual: float
    objective: float


def _clamped_mean(z_row: NodalVector, h: float) -> float:
    """max{0, mean(z)} with the trapezoidal mean h * sum(z) (zero ends)."""
    return max(0.0, h * float(np.sum(z_row)))


def project_control(z_row: NodalVector, kappa: float, h: float) -> NodalVector:
    """Optimality projection (1/kappa) max{0, mean(z)} - z/kappa of one row."""
    if kappa <= 0.0:
        raise ValueError(f"project_control requires kappa > 0, got {kappa}")
    return (_clamped_mean(z_row, h) - np.asarray(z_row, dtype=float)) / kappa


def control_boundary_value(z_row: NodalVector, kappa: float, h: float) -> float:
    """Boundary trace of the projected control: max{0, mean(z)}/kappa.

    The adjoint vanishes on the boundary, so only the clamped mean survives
    there; this value closes the control's trapezoidal integral to exactly
    max{0, mean} - mean >= 0.
    """
    if kappa <= 0.0:
        raise ValueError(f"control_boundary_value requires kappa > 0, got {kappa}")
    return _clamped_mean(z_row, h) / kappa


def objective_eval(
    U: Trajectory,
    ud_samples: np.ndarray,
    C: np.ndarray,
    kappa: float,
    h: float,
    tau: float,
) -> float:
    """Tracking objective 0.5||U - u_d||^2 + (kappa/2)||C||^2, discretized.

    Spatial norms are the interior discrete L2 norm; time integrals are
    composite trapezoids.  The control lives on levels 0..N-1 (row n drives
    step n+1), so its trapezoid is closed by holding the last row constant
    over the final step.
    """
    diff = U - ud_samples
    state_sq = h * np.einsum("ij,ij->i", diff, diff)
    state_part = tau * (np.sum(state_sq) - 0.5 * (state_sq[0] + state_sq[-1]))
    ctrl_sq = h * np.einsum("ij,ij->i", C, C)
    ctrl_part = tau * (np.sum(ctrl_sq) - 0.5 * ctrl_sq[0] + 0.5 * ctrl_sq[-1])
    return 0.5 * state_part + 0.5 * kappa * ctrl_part


def fixed_point_optimize(
    problem: ControlProblem,
    on_iteration: Callable[[int, float], None] | None = None,
) -> OptimalityResult:
    """Alternate state/adjoint solves with projection until the control stalls.

    Starts from C = 0; every iteration solves the state with forcing rows
    q^j + C^{j-1}, solves the adjoint against the target, projects each of
    the adjoint rows 0..N-1 (and the implied boundary value) into the new
    control, and measures the sup-norm update.  on_iteration, when given,
    receives (iteration, residual) after every sweep — handy for logging
    residual histories.  Raises FixedPointError with
    the last residual when max_iters is exhausted.
    """
    spec, N, M = problem.spec, problem.N, problem.M
    fem = FemOperators.build(Mesh1D(M))
    h = fem.mesh.h
    tables = build_tables(spec, N, default_g_rule(spec, problem.quad_nodes))

    m = M - 1
    C = np.zeros((N, m))
    C_edge = np.zeros((N, 2))
    q_edge = problem.q_boundary
    residual = np.inf
    for iteration in range(1, problem.max_iters + 1):
        edge = C_edge if q_edge is None else q_edge + C_edge
        plan = ForcingPlan.nodal_history(problem.q_samples + C, edge)
        U = solve_state(tables, fem, plan)
        Z = solve_adjoint(tables, fem, U, problem.ud_samples, problem.ud_boundary)
        means = np.maximum(0.0, h * Z[:N].sum(axis=1))
        C_new = (means[:, None] - Z[:N]) / problem.kappa
        C_edge_new = np.repeat(means[:, None] / problem.kappa, 2, axis=1)
        residual = max(
            float(np.max(np.abs(C_new - C), initial=0.0)),
            float(np.max(np.abs(C_edge_new - C_edge), initial=0.0)),
        )
        C, C_edge = C_new, C_edge_new
        if on_iteration is not None:
            on_iteration(iteration, residual)
        if residual < problem.tol:
            objective = objective_eval(
                U, problem.ud_samples, C, problem.kappa, h, tables.tau
            )
            _check_admissible(C, C_edge, h)
            return OptimalityResult(
                U=U,
                Z=Z,
                C=C,
                iterations=iteration,
                residual=residual,
                objective=objective,
            )
    raise FixedPointError(
        f"fixed-point iteration did not converge in {problem.max_iters} steps "
        f"(last update {residual:.3e}); kappa may be too small for this mesh",
        residual=residual,
    )


def _check_admissible(C: np.ndarray, C_edge: np.ndarray, h: float) -> None:
    """Defensive check of the mean constraint on every projected row."""
    integrals = h * C.sum(axis=1) + 0.5 * h * C_edge.sum(axis=1)
    worst = float(integrals.min(initial=0.0))
    if worst < -1e-12:
        raise RuntimeError(
            f"projected control violates the mean constraint ({worst:.3e})"
        )
