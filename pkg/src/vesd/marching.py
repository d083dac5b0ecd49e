"""Time-marching engines for the reformulated state and adjoint equations.

Both equations reduce to the same marching problem: with the L1 operator on
the left and the memory/history sums on the right, step n solves

    (b_0 M + S) U^n = M * sum_{k=1..n-1} (b_{n-k-1} - b_{n-k}) U^k
                      - S * sum_{j=1..n} w_j U^{n-j}
                      + M F^n + boundary load,

with U^0 = 0, mass M and stiffness S.  The adjoint is the identical scheme
run in reversed time (the memory kernel depends only on the lag), so one
core serves both solvers; the left operator is factored once per run.

Forcing enters either as per-step nodal samples s^j whose discrete
fractional integral F^n = sum_{j<=n} bhat_{n-j} s^j is accumulated during
the march ("nodal-history"), or as precomputed F^n rows ("direct-F").
Loads are the inner products of the interpolant of the forcing against the
interior hat functions, so plans may carry the forcing's boundary samples;
they contribute (h/6) * F(0) and (h/6) * F(1) to the first and last rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem1d import FemOperators, NodalVector, TriDiag, factor_spd, tridiag_solve
from .kernels import KernelTables

__all__ = [
    "ForcingPlan",
    "Trajectory",
    "discrete_frac_integral",
    "solve_adjoint",
    "solve_state",
]

#: (N+1) x (M-1) array of interior nodal rows by time level; row 0 is zero
#: for state and reversed-adjoint trajectories (homogeneous initial data).
Trajectory = np.ndarray

_MODES = ("nodal-history", "direct-F")


@dataclass(frozen=True, eq=False)
class ForcingPlan:
    """Right-hand-side description for one marching run.

    samples has one row per step (N, M-1): the nodal values s^j (rows
    j = 1..N) in "nodal-history" mode, or the ready-made F^n rows in
    "direct-F" mode.  boundary optionally carries the same quantity's values
    at x = 0 and x = 1, one (left, right) pair per step.
    """

    mode: str
    samples: np.ndarray
    boundary: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"ForcingPlan mode must be one of {_MODES}")
        if self.samples.ndim != 2:
            raise ValueError("ForcingPlan samples must be (steps, interior nodes)")
        if self.boundary is not None and self.boundary.shape != (
            self.samples.shape[0],
            2,
        ):
            raise ValueError("ForcingPlan boundary must have shape (steps, 2)")

    @property
    def steps(self) -> int:
        return self.samples.shape[0]

    @staticmethod
    def nodal_history(
        samples: np.ndarray, boundary: np.ndarray | None = None
    ) -> "ForcingPlan":
        """Per-step nodal samples s^j; F^n is accumulated during the march."""
        return ForcingPlan("nodal-history", np.asarray(samples, dtype=float), boundary)

    @staticmethod
    def direct(
        forcing: np.ndarray, boundary: np.ndarray | None = None
    ) -> "ForcingPlan":
        """Precomputed F^n rows, used verbatim."""
        return ForcingPlan("direct-F", np.asarray(forcing, dtype=float), boundary)


def discrete_frac_integral(bhat: np.ndarray, samples: np.ndarray, n: int):
    """Discrete fractional integral sum_{j=1..n} bhat_{n-j} * samples^j.

    samples holds per-step values (scalar sequence or nodal rows) with row
    j-1 carrying step j; returns the step-n value (float or nodal vector).
    """
    bhat = np.asarray(bhat, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if not 1 <= n <= samples.shape[0] or n > bhat.size:
        raise ValueError(f"step {n} outside the tabulated range")
    out = bhat[:n][::-1] @ samples[:n]
    return float(out) if samples.ndim == 1 else out


def _march(
    tables: KernelTables,
    fem: FemOperators,
    plan: ForcingPlan,
    refactor_each_step: bool = False,
) -> Trajectory:
    """Shared forward-marching core (see module docstring for the scheme)."""
    N = tables.N
    m = fem.mesh.interior_count
    if plan.steps != N:
        raise ValueError(f"plan has {plan.steps} steps, tables have {N}")
    if plan.samples.shape[1] != m:
        raise ValueError(
            f"plan rows have {plan.samples.shape[1]} nodes, mesh has {m}"
        )
    h = fem.mesh.h
    mass, stiff = fem.mass, fem.stiffness
    b, w, bhat = tables.b, tables.w, tables.bhat
    left = TriDiag(
        sub=b[0] * mass.sub + stiff.sub,
        diag=b[0] * mass.diag + stiff.diag,
        sup=b[0] * mass.sup + stiff.sup,
    )
    factor = None if refactor_each_step else factor_spd(left)

    samples = np.ascontiguousarray(plan.samples)
    boundary = plan.boundary
    if boundary is not None:
        boundary = np.ascontiguousarray(boundary, dtype=float)
    nodal_mode = plan.mode == "nodal-history"

    # Reversed coefficient tables so every per-step history sum is a BLAS
    # product of a coefficient view against a contiguous block of rows.
    drops_rev = (b[:-1] - b[1:])[::-1]  # pairs U^1..U^{n-1}
    w_rev = w[::-1]  # pairs U^0..U^{n-1.}
    bhat_rev = bhat[::-1]  # pairs s^1..s^n

    U = np.zeros((N + 1, m))
    for n in range(1, N + 1):
        mass_hist = drops_rev[len(drops_rev) - (n - 1) :] @ U[1:n]
        stiff_hist = w_rev[N - n :] @ U[0:n]
        if nodal_mode:
            forcing = bhat_rev[N - n :] @ samples[:n]
            edge = bhat_rev[N - n :] @ boundary[:n] if boundary is not None else None
        else:
            forcing = samples[n - 1]
            edge = boundary[n - 1] if boundary is not None else None
        rhs = mass.matvec(mass_hist + forcing) - stiff.matvec(stiff_hist)
        if edge is not None:
            rhs[0] += (h / 6.0) * edge[0]
            rhs[-1] += (h / 6.0) * edge[1]
        U[n] = tridiag_solve(left, rhs) if factor is None else factor.solve(rhs)
    return U


def solve_state(
    tables: KernelTables,
    fem: FemOperators,
    plan: ForcingPlan,
    refactor_each_step: bool = False,
) -> Trajectory:
    """March the fully discrete state scheme from U^0 = 0.

    In nodal-history mode the plan rows are the forcing samples
    s^j = q^j + C^{j-1}; direct-F plans bypass the discrete fractional
    integral (for manufactured right-hand sides).
    """
    return _march(tables, fem, plan, refactor_each_step=refactor_each_step)


def solve_adjoint(
    tables: KernelTables,
    fem: FemOperators,
    state: Trajectory,
    ud_samples: np.ndarray,
    ud_boundary: np.ndarray | None = None,
) -> Trajectory:
    """Solve the adjoint scheme and return the un-reversed trajectory Z.

    The reversed variable Zbar marches from Zbar^0 = 0 with the same tables
    (the memory kernel depends only on the lag) and forcing rows
    sbar^j = U^{N-j} - u_d(t_{N-j}); ud_samples therefore carries u_d at all
    levels t_0..t_N ((N+1) rows; the final row feeds only the objective).
    The result is flipped so Z^n = Zbar^{N-n}, making row N identically zero.
    """
    N = tables.N
    m = fem.mesh.interior_count
    if state.shape != (N + 1, m):
        raise ValueError(f"state has shape {state.shape}, expected {(N + 1, m)}")
    if ud_samples.shape != (N + 1, m):
        raise ValueError(
            f"ud_samples has shape {ud_samples.shape}, expected {(N + 1, m)}"
        )
    forcing_rows = (state[:N] - ud_samples[:N])[::-1]
    boundary = None
    if ud_boundary is not None:
        if ud_boundary.shape != (N + 1, 2):
            raise ValueError(
                f"ud_boundary has shape {ud_boundary.shape}, expected {(N + 1, 2)}"
            )
        boundary = -ud_boundary[:N][::-1]
    zbar = _march(tables, fem, ForcingPlan.nodal_history(forcing_rows, boundary))
    return zbar[::-1].copy()
