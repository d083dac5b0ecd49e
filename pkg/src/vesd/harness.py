"""Experiment drivers: convergence studies, oracles, config and CSV output.

Three bundled model problems exercise the solvers end to end:

* a pure state solve with constant forcing under a decreasing exponent,
  measured by two-mesh temporal/spatial refinement;
* a tracking control problem with a quadratic target, measured the same way
  for state, adjoint and control;
* a manufactured optimal-control problem whose exact state/adjoint are
  separable power-in-time fields, with the matching forcing and target
  computed here by independent quadrature (the oracle never touches the
  solver's kernel tables).

A constant-exponent closed-form oracle (Mittag-Leffler) validates the
marching scheme against an exact solution.  Reports serialize to CSV with
>= 10 significant digits and LF line endings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .control import (
    ControlProblem,
    OptimalityResult,
    fixed_point_optimize,
)
from .fem1d import FemOperators, Mesh1D, interpolate, l2_norm_discrete
from .kernels import (
    DEFAULT_G_NODES,
    ExponentSpec,
    KernelTables,
    build_tables,
    default_g_rule,
)
from .marching import ForcingPlan, Trajectory, solve_state
from .special import JacobiRule, MLParams, gamma_fn, jacobi_rule, mittag_leffler

__all__ = [
    "ConvergenceReport",
    "Example3Result",
    "ManufacturedData",
    "OracleConsistencyError",
    "SeparableField",
    "StudyConfig",
    "constant_exponent_spatial_errors",
    "constant_exponent_temporal_errors",
    "example1_study",
    "example2_study",
    "example3_fields",
    "example3_study",
    "manufactured_forcing",
    "ml_exact_rows",
    "parse_config",
    "power_kernel_integral",
    "rates_from_errors",
    "run_example",
    "tracking_problem",
    "write_kernel_csv",
    "write_report_csv",
    "write_rows_csv",
    "two_mesh_spatial_error",
    "two_mesh_temporal_error",
]


class OracleConsistencyError(RuntimeError):
    """Manufactured-forcing quadratures failed their refinement self-check."""


# ---------------------------------------------------------------------------
# Reports and two-mesh errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    """One refinement column: errors and log2-rates for a single variable."""

    variable: str
    direction: str  # "temporal" | "spatial"
    params: tuple[int, ...]
    errors: tuple[float, ...]
    rates: tuple[float, ...]

    def rows(self) -> Iterable[tuple[int, float, float | None]]:
        """(param, error, rate) rows; the first row has no rate."""
        for i, (param, err) in enumerate(zip(self.params, self.errors)):
            yield param, err, self.rates[i - 1] if i else None


def rates_from_errors(errors: Sequence[float]) -> list[float]:
    """Observed orders log2(E_i / E_{i+1}) along a doubling ladder."""
    errs = [float(e) for e in errors]
    if any(e <= 0.0 for e in errs):
        raise ValueError("rates_from_errors requires positive errors")
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


def two_mesh_temporal_error(coarse: Trajectory, fine: Trajectory, h: float) -> float:
    """max_{n=1..N} discrete-L2 distance between fine row 2n and coarse row n."""
    rows_c, m = coarse.shape
    if fine.shape != (2 * (rows_c - 1) + 1, m):
        raise ValueError(
            f"fine trajectory {fine.shape} is not the time-doubling of {coarse.shape}"
        )
    diff = fine[2::2] - coarse[1:]
    return math.sqrt(h * float(np.max(np.einsum("ij,ij->i", diff, diff))))


def _control_temporal_error(coarse: np.ndarray, fine: np.ndarray, h: float) -> float:
    """Two-mesh temporal error for control arrays (rows 0..N-1 at t_n)."""
    rows_c, m = coarse.shape
    if fine.shape != (2 * rows_c, m):
        raise ValueError(
            f"fine control {fine.shape} is not the time-doubling of {coarse.shape}"
        )
    diff = fine[::2] - coarse
    return math.sqrt(h * float(np.max(np.einsum("ij,ij->i", diff, diff))))


def two_mesh_spatial_error(coarse: np.ndarray, fine: np.ndarray, h: float) -> float:
    """max over rows of the discrete-L2 distance between the two interpolants.

    h is the coarse mesh width; fine must halve it (fine columns 1, 3, 5, ...
    sit at the coarse nodes).  Both fields are read as piecewise-linear
    functions and compared at every fine node with the fine mesh's weight:
    at the shared nodes the difference is nodal, at the fine-only midpoints
    the coarse value is the average of its bracketing nodes (zero beyond the
    boundary).  Comparing node-to-node at the shared nodes alone would
    discard the midpoint component, which dominates the refinement error by
    an order of magnitude.  Accepts trajectories and control arrays alike.
    """
    rows_c, m = coarse.shape
    if fine.shape != (rows_c, 2 * m + 1):
        raise ValueError(
            f"fine field {fine.shape} is not the space-doubling of {coarse.shape}"
        )
    padded = np.zeros((rows_c, m + 2))
    padded[:, 1:-1] = coarse
    shared = fine[:, 1::2] - coarse
    midpoints = fine[:, 0::2] - 0.5 * (padded[:, :-1] + padded[:, 1:])
    sq = np.einsum("ij,ij->i", shared, shared)
    sq += np.einsum("ij,ij->i", midpoints, midpoints)
    return math.sqrt(0.5 * h * float(np.max(sq)))


# ---------------------------------------------------------------------------
# Constant-exponent Mittag-Leffler oracle
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _ml_time_factor(alpha0: float, t: float) -> float:
    """t * E_{alpha0,2}(-pi^2 t^alpha0), the sin(pi x) modal amplitude."""
    if t == 0.0:
        return 0.0
    z = -math.pi**2 * t**alpha0
    return t * mittag_leffler(MLParams(p=alpha0, pbar=2.0, z=z))


def ml_exact_rows(alpha0: float, times: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Exact solution rows u(x, t) = t E_{a0,2}(-pi^2 t^a0) sin(pi x).

    This is the solution of the constant-exponent problem with forcing
    q = sin(pi x), zero control and zero initial data.
    """
    factors = np.array([_ml_time_factor(alpha0, float(t)) for t in times])
    return np.outer(factors, np.sin(math.pi * mesh.interior_nodes()))


def _sine_forcing_solve(
    spec: ExponentSpec, N: int, fem: FemOperators, rule: JacobiRule
) -> Trajectory:
    row = np.sin(math.pi * fem.mesh.interior_nodes())
    samples = np.tile(row, (N, 1))
    tables = build_tables(spec, N, rule)
    return solve_state(tables, fem, ForcingPlan.nodal_history(samples))


def constant_exponent_temporal_errors(
    alpha0: float,
    T: float,
    N_list: Sequence[int],
    M: int,
    quad_nodes: int = DEFAULT_G_NODES,
) -> list[float]:
    """max-over-time discrete-L2 errors against the closed form, per N."""
    spec = ExponentSpec(alpha0, 0.0, T)
    rule = default_g_rule(spec, quad_nodes)
    fem = FemOperators.build(Mesh1D(M))
    errors = []
    for N in N_list:
        U = _sine_forcing_solve(spec, N, fem, rule)
        times = np.arange(N + 1, dtype=float) * (T / N)
        diff = U - ml_exact_rows(alpha0, times, fem.mesh)
        sq = np.einsum("ij,ij->i", diff, diff)
        errors.append(math.sqrt(fem.mesh.h * float(np.max(sq))))
    return errors


def constant_exponent_spatial_errors(
    alpha0: float,
    T: float,
    M_list: Sequence[int],
    N: int,
    quad_nodes: int = DEFAULT_G_NODES,
) -> list[float]:
    """Same error measure along a spatial ladder at fixed (large) N."""
    spec = ExponentSpec(alpha0, 0.0, T)
    rule = default_g_rule(spec, quad_nodes)
    times = np.arange(N + 1, dtype=float) * (T / N)
    errors = []
    for M in M_list:
        fem = FemOperators.build(Mesh1D(M))
        U = _sine_forcing_solve(spec, N, fem, rule)
        diff = U - ml_exact_rows(alpha0, times, fem.mesh)
        sq = np.einsum("ij,ij->i", diff, diff)
        errors.append(math.sqrt(fem.mesh.h * float(np.max(sq))))
    return errors


# ---------------------------------------------------------------------------
# Bundled study 1: constant forcing, state only
# ---------------------------------------------------------------------------


def _constant_forcing_solve(
    spec: ExponentSpec, N: int, fem: FemOperators, rule: JacobiRule
) -> Trajectory:
    samples = np.ones((N, fem.mesh.interior_count))
    boundary = np.ones((N, 2))
    tables = build_tables(spec, N, rule)
    return solve_state(tables, fem, ForcingPlan.nodal_history(samples, boundary))


def example1_study(
    alpha0: float,
    *,
    slope: float = -1.0 / 6.0,
    T: float = 0.5,
    N_list: Sequence[int] = (128, 256, 512, 1024),
    M_temporal: int = 32,
    M_list: Sequence[int] = (8, 16, 32, 64),
    N_spatial: int = 64,
    quad_nodes: int = DEFAULT_G_NODES,
) -> tuple[ConvergenceReport, ConvergenceReport]:
    """Two-mesh temporal and spatial reports for the constant-forcing problem
    (q = 1, no control) under alpha(t) = alpha0 + slope * t."""
    spec = ExponentSpec(alpha0, slope, T)
    rule = default_g_rule(spec, quad_nodes)

    fem = FemOperators.build(Mesh1D(M_temporal))
    needed = sorted({int(N) for N in N_list} | {2 * int(N) for N in N_list})
    solves = {N: _constant_forcing_solve(spec, N, fem, rule) for N in needed}
    errors = [
        two_mesh_temporal_error(solves[int(N)], solves[2 * int(N)], fem.mesh.h)
        for N in N_list
    ]
    temporal = ConvergenceReport(
        "U", "temporal", tuple(int(N) for N in N_list), tuple(errors),
        tuple(rates_from_errors(errors)),
    )

    needed_m = sorted({int(M) for M in M_list} | {2 * int(M) for M in M_list})
    fems = {M: FemOperators.build(Mesh1D(M)) for M in needed_m}
    solves_m = {
        M: _constant_forcing_solve(spec, N_spatial, fems[M], rule) for M in needed_m
    }
    errors_m = [
        two_mesh_spatial_error(solves_m[int(M)], solves_m[2 * int(M)], 1.0 / int(M))
        for M in M_list
    ]
    spatial = ConvergenceReport(
        "U", "spatial", tuple(int(M) for M in M_list), tuple(errors_m),
        tuple(rates_from_errors(errors_m)),
    )
    return temporal, spatial


# ---------------------------------------------------------------------------
# Bundled study 2: tracking control with a quadratic target
# ---------------------------------------------------------------------------


def tracking_problem(
    spec: ExponentSpec,
    kappa: float,
    N: int,
    M: int,
    tol: float,
    max_iters: int,
    quad_nodes: int,
) -> ControlProblem:
    """q = 1 with target u_d = 1 - 4(x - 1/2)^2, boundary-aware."""
    mesh = Mesh1D(M)
    m = mesh.interior_count
    ud_row = interpolate(lambda x: 1.0 - 4.0 * (x - 0.5) ** 2, mesh)
    return ControlProblem(
        spec=spec,
        N=N,
        M=M,
        kappa=kappa,
        q_samples=np.ones((N, m)),
        ud_samples=np.tile(ud_row, (N + 1, 1)),
        q_boundary=np.ones((N, 2)),
        ud_boundary=None,
        tol=tol,
        max_iters=max_iters,
        quad_nodes=quad_nodes,
    )


@dataclass(frozen=True)
class Example2Study:
    """Reports for state/adjoint/control in both refinement directions."""

    reports: tuple[ConvergenceReport, ...]
    max_iterations: int

    def report(self, variable: str, direction: str) -> ConvergenceReport:
        for rep in self.reports:
            if rep.variable == variable and rep.direction == direction:
                return rep
        raise KeyError((variable, direction))


def example2_study(
    *,
    alpha0: float = 0.2,
    slope: float = -1.0 / 6.0,
    T: float = 1.0,
    kappa: float = 7.0 / 8.0,
    N_list: Sequence[int] = (4, 8, 16, 32),
    M_temporal: int = 32,
    M_list: Sequence[int] = (4, 8, 16, 32),
    N_spatial: int = 16,
    tol: float = 1e-6,
    max_iters: int = 500,
    quad_nodes: int = DEFAULT_G_NODES,
) -> Example2Study:
    """Two-mesh study of the full optimality system on the tracking problem."""
    spec = ExponentSpec(alpha0, slope, T)
    reports: list[ConvergenceReport] = []
    max_iterations = 0

    def optimize(N: int, M: int) -> OptimalityResult:
        nonlocal max_iterations
        result = fixed_point_optimize(
            tracking_problem(spec, kappa, N, M, tol, max_iters, quad_nodes)
        )
        max_iterations = max(max_iterations, result.iterations)
        return result

    h = 1.0 / M_temporal
    needed = sorted({int(N) for N in N_list} | {2 * int(N) for N in N_list})
    by_n = {N: optimize(N, M_temporal) for N in needed}
    for variable in ("U", "Z", "C"):
        errors = []
        for N in N_list:
            a, b = by_n[int(N)], by_n[2 * int(N)]
            if variable == "U":
                errors.append(two_mesh_temporal_error(a.U, b.U, h))
            elif variable == "Z":
                errors.append(two_mesh_temporal_error(a.Z, b.Z, h))
            else:
                errors.append(_control_temporal_error(a.C, b.C, h))
        reports.append(
            ConvergenceReport(
                variable, "temporal", tuple(int(N) for N in N_list),
                tuple(errors), tuple(rates_from_errors(errors)),
            )
        )

    needed_m = sorted({int(M) for M in M_list} | {2 * int(M) for M in M_list})
    by_m = {M: optimize(N_spatial, M) for M in needed_m}
    for variable in ("U", "Z", "C"):
        errors = []
        for M in M_list:
            a, b = by_m[int(M)], by_m[2 * int(M)]
            field_a = getattr(a, variable)
            field_b = getattr(b, variable)
            errors.append(two_mesh_spatial_error(field_a, field_b, 1.0 / int(M)))
        reports.append(
            ConvergenceReport(
                variable, "spatial", tuple(int(M) for M in M_list),
                tuple(errors), tuple(rates_from_errors(errors)),
            )
        )
    return Example2Study(reports=tuple(reports), max_iterations=max_iterations)


# ---------------------------------------------------------------------------
# Manufactured optimal-control oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparableField:
    """amplitude * s^time_power * profile(x) with s = t or s = T - t."""

    amplitude: float
    time_power: float
    profile: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]
    reversed_time: bool = False

    def time_factor(self, t, T: float):
        s = (T - np.asarray(t, dtype=float)) if self.reversed_time else np.asarray(
            t, dtype=float
        )
        return self.amplitude * s**self.time_power


def power_kernel_integral(
    spec: ExponentSpec, power: float, t: float, rule: JacobiRule
) -> float:
    """integral_0^t k(t - s) s^power ds with k(r) = r^{alpha(r)-1}/Gamma(alpha(r)).

    Substituting s = t * sigma gives t^{power + alpha0} times a Jacobi
    integral with weight sigma^power (1 - sigma)^{alpha0 - 1}; the rule must
    carry exactly those exponents.  For slope = 0 this reduces to the
    Abel fractional integral Gamma(power+1) t^{power+alpha0} /
    Gamma(power+1+alpha0).
    """
    if not (rule.exp_left == power and rule.exp_right == spec.alpha0 - 1.0):
        raise ValueError("quadrature rule does not match the integrand's exponents")
    if t < 0.0:
        raise ValueError("power_kernel_integral requires t >= 0")
    if t == 0.0:
        return 0.0
    if not 0.0 < spec.alpha0 + spec.slope * t < 1.0:
        raise ValueError(f"exponent leaves (0, 1) at t = {t}")
    r = t * (1.0 - rule.nodes)
    smooth = np.exp(spec.slope * r * np.log(r)) / gamma_fn(spec.alpha(r))
    return t ** (power + spec.alpha0) * float(rule.weights @ smooth)


def _richardson_derivative(fn: Callable[[float], float], t: float, delta: float) -> float:
    """Fourth-order derivative estimate from central differences at two steps."""
    def central(d: float) -> float:
        return (fn(t + d) - fn(t - d)) / (2.0 * d)

    return (4.0 * central(delta / 2.0) - central(delta)) / 3.0


@dataclass(frozen=True, eq=False)
class ManufacturedData:
    """Forcing, target, and exact fields for a manufactured control problem."""

    spec: ExponentSpec
    kappa: float
    N: int
    M: int
    q_samples: np.ndarray
    q_boundary: np.ndarray
    ud_samples: np.ndarray
    ud_boundary: np.ndarray
    c_samples: np.ndarray
    u_final: np.ndarray
    z_initial: np.ndarray

    def control_problem(
        self, tol: float = 1e-6, max_iters: int = 500, quad_nodes: int = DEFAULT_G_NODES
    ) -> ControlProblem:
        return ControlProblem(
            spec=self.spec,
            N=self.N,
            M=self.M,
            kappa=self.kappa,
            q_samples=self.q_samples,
            ud_samples=self.ud_samples,
            q_boundary=self.q_boundary,
            ud_boundary=self.ud_boundary,
            tol=tol,
            max_iters=max_iters,
            quad_nodes=quad_nodes,
        )


def example3_fields(case: str) -> tuple[SeparableField, SeparableField]:
    """Exact (state, adjoint) pairs: u = t^0.8 phi, z = 2 (1-t)^0.8 phi."""
    if case == "a":
        profile = lambda x: np.sin(math.pi * np.asarray(x, dtype=float))
        laplacian = lambda x: -math.pi**2 * np.sin(math.pi * np.asarray(x, dtype=float))
    elif case == "b":
        profile = lambda x: np.asarray(x, dtype=float) ** 2 * (1.0 - np.asarray(x, dtype=float)) ** 2
        laplacian = lambda x: 2.0 - 12.0 * np.asarray(x, dtype=float) + 12.0 * np.asarray(x, dtype=float) ** 2
    else:
        raise ValueError(f"unknown manufactured case {case!r} (expected 'a' or 'b')")
    exact_u = SeparableField(1.0, 0.8, profile, laplacian, reversed_time=False)
    exact_z = SeparableField(2.0, 0.8, profile, laplacian, reversed_time=True)
    return exact_u, exact_z


def _refinement_check(coarse: np.ndarray, fine: np.ndarray, what: str) -> None:
    scale = np.maximum(np.abs(fine), 1e-8)
    worst = float(np.max(np.abs(coarse - fine) / scale, initial=0.0))
    if worst > 1e-7:
        raise OracleConsistencyError(
            f"{what} quadrature moved by {worst:.3e} relative under node doubling"
        )


def manufactured_forcing(
    exact_u: SeparableField,
    exact_z: SeparableField,
    spec: ExponentSpec,
    kappa: float,
    N: int,
    M: int,
    quad_nodes: int = DEFAULT_G_NODES,
) -> ManufacturedData:
    """Forcing q, target u_d, and exact control for prescribed exact fields.

    With u = a_u t^{p_u} phi_u and z = a_z (T-t)^{p_z} phi_z the governing
    equations give, writing K(t) = integral k(t-s) s^{p_u} ds and
    W(tb) = integral k(tb-y) y^{p_z-1} dy:

        c    = (max{0, mean z} - z)/kappa,
        q    = a_u p_u t^{p_u-1} phi_u - a_u lap(phi_u) K'(t) - c,
        u_d  = u - a_z p_z (T-t)^{p_z-1} phi_z + a_z p_z lap(phi_z) W(T-t).

    K' is evaluated by Richardson-extrapolated central differences on an
    auxiliary grid ten times finer than the solver's; every quadrature is
    re-run with doubled nodes and must agree to 1e-7 relative.  The target's
    final row (t = T, where u_d is singular but never consumed by the
    adjoint) repeats row N-1.
    """
    if exact_u.reversed_time or not exact_z.reversed_time:
        raise ValueError(
            "manufactured_forcing expects forward-time exact_u and "
            "reversed-time exact_z"
        )
    T = spec.T
    tau = T / N
    mesh = Mesh1D(M)
    xs = mesh.interior_nodes()
    edges = np.array([0.0, 1.0])

    a_u, p_u = exact_u.amplitude, exact_u.time_power
    a_z, p_z = exact_z.amplitude, exact_z.time_power
    phi_u, lap_u = exact_u.profile(xs), exact_u.laplacian(xs)
    phi_z, lap_z = exact_z.profile(xs), exact_z.laplacian(xs)
    phi_u_edge, lap_u_edge = exact_u.profile(edges), exact_u.laplacian(edges)
    phi_z_edge, lap_z_edge = exact_z.profile(edges), exact_z.laplacian(edges)

    legendre = jacobi_rule(quad_nodes, 0.0, 0.0)
    mean_phi_z = legendre.integrate(exact_z.profile)

    def tables(nodes: int) -> tuple[np.ndarray, np.ndarray]:
        rule_k = jacobi_rule(nodes, p_u, spec.alpha0 - 1.0)
        rule_w = jacobi_rule(nodes, p_z - 1.0, spec.alpha0 - 1.0)

        def K(t: float) -> float:
            return power_kernel_integral(spec, p_u, t, rule_k)

        k_prime = np.array(
            [_richardson_derivative(K, n * tau, tau / 10.0) for n in range(1, N + 1)]
        )
        w_vals = np.array(
            [
                power_kernel_integral(spec, p_z - 1.0, T - n * tau, rule_w)
                for n in range(N)
            ]
        )
        return k_prime, w_vals

    k_prime, w_vals = tables(quad_nodes)
    k_prime_fine, w_vals_fine = tables(2 * quad_nodes)
    _refinement_check(k_prime, k_prime_fine, "memory-term derivative")
    _refinement_check(w_vals, w_vals_fine, "target cap term")

    t_steps = np.arange(1, N + 1, dtype=float) * tau  # t_1..t_N (q rows)
    t_levels = np.arange(0, N, dtype=float) * tau  # t_0..t_{N-1} (c, u_d rows)

    def control_rows(prof: np.ndarray, times: np.ndarray) -> np.ndarray:
        zf = exact_z.time_factor(times, T)[:, None]
        means = np.maximum(0.0, zf[:, 0] * mean_phi_z)[:, None]
        return (means - zf * prof[None, :]) / kappa

    c_samples = control_rows(phi_z, t_levels)
    c_steps = control_rows(phi_z, t_steps)
    c_steps_edge = control_rows(phi_z_edge, t_steps)

    du_steps = a_u * p_u * t_steps ** (p_u - 1.0)
    q_samples = du_steps[:, None] * phi_u[None, :] - np.outer(a_u * k_prime, lap_u) - c_steps
    q_boundary = (
        du_steps[:, None] * phi_u_edge[None, :]
        - np.outer(a_u * k_prime, lap_u_edge)
        - c_steps_edge
    )

    dz_levels = -a_z * p_z * (T - t_levels) ** (p_z - 1.0)
    u_rows = exact_u.time_factor(t_levels, T)[:, None] * phi_u[None, :]
    cap = a_z * p_z * w_vals
    ud_rows = u_rows + dz_levels[:, None] * phi_z[None, :] + np.outer(cap, lap_z)
    ud_samples = np.vstack([ud_rows, ud_rows[-1]])

    u_rows_edge = exact_u.time_factor(t_levels, T)[:, None] * phi_u_edge[None, :]
    ud_edge = (
        u_rows_edge
        + dz_levels[:, None] * phi_z_edge[None, :]
        + np.outer(cap, lap_z_edge)
    )
    ud_boundary = np.vstack([ud_edge, ud_edge[-1]])

    return ManufacturedData(
        spec=spec,
        kappa=kappa,
        N=N,
        M=M,
        q_samples=q_samples,
        q_boundary=q_boundary,
        ud_samples=ud_samples,
        ud_boundary=ud_boundary,
        c_samples=c_samples,
        u_final=exact_u.time_factor(T, T) * phi_u,
        z_initial=exact_z.time_factor(0.0, T) * phi_z,
    )


@dataclass(frozen=True, eq=False)
class Example3Result:
    """Converged manufactured-problem run with exact-field comparisons."""

    data: ManufacturedData
    result: OptimalityResult
    rel_error_u_final: float
    rel_error_z_initial: float
    rel_error_c: float


def example3_study(
    case: str,
    *,
    alpha0: float = 0.8,
    slope: float = -1.0 / 6.0,
    T: float = 1.0,
    kappa: float = 1.0,
    N: int = 80,
    M: int = 32,
    quad_nodes: int = DEFAULT_G_NODES,
    tol: float = 1e-6,
    max_iters: int = 500,
) -> Example3Result:
    """Solve the manufactured problem and compare to the exact fields.

    Errors are relative discrete-L2: the final state row against u(., T),
    the initial adjoint row against z(., 0), and the control aggregated over
    all time levels (c vanishes at t = T, so per-row relative errors there
    would be ill-posed).
    """
    exact_u, exact_z = example3_fields(case)
    spec = ExponentSpec(alpha0, slope, T)
    data = manufactured_forcing(exact_u, exact_z, spec, kappa, N, M, quad_nodes)
    result = fixed_point_optimize(
        data.control_problem(tol=tol, max_iters=max_iters, quad_nodes=quad_nodes)
    )
    h = 1.0 / M
    rel_u = l2_norm_discrete(result.U[N] - data.u_final, h) / l2_norm_discrete(
        data.u_final, h
    )
    rel_z = l2_norm_discrete(result.Z[0] - data.z_initial, h) / l2_norm_discrete(
        data.z_initial, h
    )
    diff = result.C - data.c_samples
    rel_c = math.sqrt(float(np.sum(diff * diff)) / float(np.sum(data.c_samples**2)))
    return Example3Result(
        data=data,
        result=result,
        rel_error_u_final=rel_u,
        rel_error_z_initial=rel_z,
        rel_error_c=rel_c,
    )


# ---------------------------------------------------------------------------
# Configuration and CSV output
# ---------------------------------------------------------------------------

_INT_LIST_KEYS = ("N_list", "M_list")
_FLOAT_KEYS = ("alpha0", "alpha_slope", "T", "kappa", "tol")
_INT_KEYS = ("max_iters", "quad_nodes")
_STR_KEYS = ("example", "out_dir")
_ALL_KEYS = _STR_KEYS + _FLOAT_KEYS + _INT_KEYS + _INT_LIST_KEYS


@dataclass(frozen=True)
class StudyConfig:
    """Validated experiment configuration (flat key=value file contents)."""

    example: str
    alpha0: float
    alpha_slope: float
    T: float
    N_list: tuple[int, ...]
    M_list: tuple[int, ...]
    kappa: float = 1.0
    tol: float = 1e-6
    max_iters: int = 500
    quad_nodes: int = DEFAULT_G_NODES
    out_dir: str = "."

    def __post_init__(self) -> None:
        ExponentSpec(self.alpha0, self.alpha_slope, self.T)  # validity check
        for name, ladder in (("N_list", self.N_list), ("M_list", self.M_list)):
            if not ladder or any(int(v) < 1 for v in ladder):
                raise ValueError(f"{name} must hold positive integers")
            for a, b in zip(ladder, ladder[1:]):
                if b != 2 * a:
                    raise ValueError(
                        f"{name} must be a doubling ladder, got {ladder}"
                    )
        if self.kappa <= 0.0 or self.tol <= 0.0:
            raise ValueError("kappa and tol must be positive")
        if self.max_iters < 1 or self.quad_nodes < 1:
            raise ValueError("max_iters and quad_nodes must be >= 1")

    def spec(self) -> ExponentSpec:
        return ExponentSpec(self.alpha0, self.alpha_slope, self.T)


def parse_config(text: str) -> dict[str, object]:
    """Parse the flat key=value config format (comments with '#').

    Unknown and duplicate keys are rejected; list keys take comma-separated
    integers.  Returns a plain mapping for merging with per-command defaults.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            raise ValueError(
                f"config line {lineno}: unknown key {key!r} "
                f"(valid keys: {', '.join(_ALL_KEYS)})"
            )
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        try:
            if key in _STR_KEYS:
                values[key] = value
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _INT_KEYS:
                values[key] = int(value)
            else:
                values[key] = tuple(int(tok) for tok in value.replace(",", " ").split())
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {value!r}") from exc
    return values


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12e")


def write_rows_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows to CSV with LF endings; numbers get 13 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
        handle.flush()


def write_report_csv(report: ConvergenceReport, path: Path) -> None:
    param_name = "N" if report.direction == "temporal" else "M"
    write_rows_csv(path, (param_name, "error", "rate"), report.rows())


def write_kernel_csv(tables: KernelTables, path: Path) -> None:
    """Dump one kernel table set: columns n, t_n, g, w, b, bhat, P.

    w is defined for n >= 1 and b/bhat/P for n <= N-1; undefined cells are
    left empty.
    """
    rows = []
    for n in range(tables.N + 1):
        rows.append(
            (
                n,
                n * tables.tau,
                tables.g_vals[n],
                tables.w[n - 1] if n >= 1 else None,
                tables.b[n] if n < tables.N else None,
                tables.bhat[n] if n < tables.N else None,
                tables.P[n] if n < tables.N else None,
            )
        )
    write_rows_csv(path, ("n", "t_n", "g", "w", "b", "bhat", "P"), rows)


def run_example(config: StudyConfig) -> tuple[list[ConvergenceReport], list[Path]]:
    """Execute the configured study and write its CSV reports.

    Returns the reports plus the written file paths.  Files are written (and
    flushed) as soon as their report is complete, so partial results survive
    a failure in a later stage.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[ConvergenceReport] = []
    paths: list[Path] = []

    def emit(report: ConvergenceReport, stem: str) -> None:
        reports.append(report)
        path = out_dir / f"{stem}.csv"
        write_report_csv(report, path)
        paths.append(path)

    if config.example == "example1":
        temporal, spatial = example1_study(
            config.alpha0,
            slope=config.alpha_slope,
            T=config.T,
            N_list=config.N_list,
            M_list=config.M_list,
            quad_nodes=config.quad_nodes,
        )
        emit(temporal, "example1_U_temporal")
        emit(spatial, "example1_U_spatial")
    elif config.example == "example2":
        study = example2_study(
            alpha0=config.alpha0,
            slope=config.alpha_slope,
            T=config.T,
            kappa=config.kappa,
            N_list=config.N_list,
            M_list=config.M_list,
            tol=config.tol,
            max_iters=config.max_iters,
            quad_nodes=config.quad_nodes,
        )
        for report in study.reports:
            emit(report, f"example2_{report.variable}_{report.direction}")
    elif config.example == "example3":
        xs = Mesh1D(config.M_list[0]).interior_nodes()
        for case in ("a", "b"):
            res = example3_study(
                case,
                alpha0=config.alpha0,
                slope=config.alpha_slope,
                T=config.T,
                kappa=config.kappa,
                N=config.N_list[0],
                M=config.M_list[0],
                quad_nodes=config.quad_nodes,
                tol=config.tol,
                max_iters=config.max_iters,
            )
            N = res.data.N
            profile_path = out_dir / f"example3_{case}_profiles.csv"
            write_rows_csv(
                profile_path,
                ("x", "u_final", "u_final_exact", "z_initial", "z_initial_exact",
                 "c_initial", "c_initial_exact"),
                zip(
                    xs,
                    res.result.U[N],
                    res.data.u_final,
                    res.result.Z[0],
                    res.data.z_initial,
                    res.result.C[0],
                    res.data.c_samples[0],
                ),
            )
            paths.append(profile_path)
            summary_path = out_dir / f"example3_{case}_summary.csv"
            write_rows_csv(
                summary_path,
                ("rel_error_u_final", "rel_error_z_initial", "rel_error_c",
                 "iterations", "objective"),
                [
                    (
                        res.rel_error_u_final,
                        res.rel_error_z_initial,
                        res.rel_error_c,
                        res.result.iterations,
                        res.result.objective,
                    )
                ],
            )
            paths.append(summary_path)
    else:
        raise ValueError(
            f"run_example cannot dispatch example={config.example!r} "
            "(expected example1, example2 or example3)"
        )
    return reports, paths
