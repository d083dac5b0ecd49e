"""Linear finite elements on a uniform grid over (0, 1) with Dirichlet ends.

Interior-node elimination: all vectors carry the M-1 interior nodal values
(boundary values are identically zero), and the mass/stiffness operators are
symmetric tridiagonal with rows (h/6)[1, 4, 1] and (1/h)[-1, 2, -1].  Element
integrals for piecewise linears are exact, so assembly has no quadrature
error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

__all__ = [
    "FemOperators",
    "Mesh1D",
    "NodalVector",
    "SpdTriDiagFactor",
    "TriDiag",
    "assemble",
    "factor_spd",
    "interpolate",
    "l2_norm_discrete",
    "tridiag_solve",
]

#: Interior nodal values at x_j = j*h, j = 1..M-1 (boundary values are 0).
NodalVector = np.ndarray


@dataclass(frozen=True)
class Mesh1D:
    """Uniform partition of (0, 1) into M elements (M >= 2)."""

    M: int

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError(f"Mesh1D requires M >= 2, got {self.M}")

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def interior_count(self) -> int:
        return self.M - 1

    def interior_nodes(self) -> np.ndarray:
        return np.arange(1, self.M, dtype=float) / self.M


@dataclass(frozen=True, eq=False)
class TriDiag:
    """Symmetric-storage tridiagonal operator on interior nodal vectors."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self) -> None:
        m = self.diag.size
        if self.sub.size != m - 1 or self.sup.size != m - 1:
            raise ValueError("TriDiag bands have inconsistent lengths")

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, v: NodalVector) -> NodalVector:
        out = self.diag * v
        if self.size > 1:
            out[:-1] += self.sup * v[1:]
            out[1:] += self.sub * v[:-1]
        return out

    def to_banded(self) -> np.ndarray:
        """LAPACK banded layout (3, m) for solve_banded((1, 1), ...)."""
        m = self.size
        ab = np.zeros((3, m))
        ab[0, 1:] = self.sup
        ab[1] = self.diag
        ab[2, :-1] = self.sub
        return ab


def assemble(mesh: Mesh1D) -> tuple[TriDiag, TriDiag]:
    """Exact mass and stiffness operators for piecewise linears on the mesh."""
    m = mesh.interior_count
    h = mesh.h
    mass = TriDiag(
        sub=np.full(m - 1, h / 6.0),
        diag=np.full(m, 2.0 * h / 3.0),
        sup=np.full(m - 1, h / 6.0),
    )
    stiffness = TriDiag(
        sub=np.full(m - 1, -1.0 / h),
        diag=np.full(m, 2.0 / h),
        sup=np.full(m - 1, -1.0 / h),
    )
    return mass, stiffness


@dataclass(frozen=True, eq=False)
class FemOperators:
    """Mesh plus assembled mass/stiffness, bundled for the marching schemes."""

    mesh: Mesh1D
    mass: TriDiag
    stiffness: TriDiag

    @classmethod
    def build(cls, mesh: Mesh1D) -> "FemOperators":
        mass, stiffness = assemble(mesh)
        return cls(mesh=mesh, mass=mass, stiffness=stiffness)


def tridiag_solve(A: TriDiag, rhs: NodalVector) -> NodalVector:
    """Solve A x = rhs by banded LU.

    Singular systems raise scipy's LinAlgError (cannot occur for the SPD
    operators produced here; the check is defensive).
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (A.size,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({A.size},)")
    return solve_banded((1, 1), A.to_banded(), rhs, check_finite=False)


@dataclass(frozen=True, eq=False)
class SpdTriDiagFactor:
    """Banded Cholesky factor of an SPD tridiagonal, reusable across solves."""

    bands: np.ndarray

    def solve(self, rhs: NodalVector) -> NodalVector:
        return cho_solve_banded((self.bands, False), rhs, check_finite=False)


def factor_spd(A: TriDiag) -> SpdTriDiagFactor:
    """Cholesky-factor a symmetric positive definite tridiagonal operator.

    Raises ValueError on asymmetric bands and scipy's LinAlgError when the
    operator is not positive definite.
    """
    if not np.array_equal(A.sub, A.sup):
        raise ValueError("factor_spd requires symmetric bands")
    m = A.size
    ab = np.zeros((2, m))
    ab[0, 1:] = A.sup
    ab[1] = A.diag
    return SpdTriDiagFactor(bands=cholesky_banded(ab, lower=False, check_finite=False))


def l2_norm_discrete(v: NodalVector, h: float) -> float:
    """Discrete L2 norm sqrt(h * sum v_j^2) over interior nodes."""
    v = np.asarray(v, dtype=float)
    return math.sqrt(h * float(v @ v))


def interpolate(f: Callable[[float], float], mesh: Mesh1D) -> NodalVector:
    """Sample a scalar field at the interior nodes (vectorized when possible)."""
    xs = mesh.interior_nodes()
    try:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(f(x)) for x in xs])
