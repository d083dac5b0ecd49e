"""Tests for the state/adjoint time-marching engines."""

from __future__ import annotations

import math

import numpy as np
import pytest

from vesd.fem1d import FemOperators, Mesh1D, l2_norm_discrete
from vesd.kernels import ExponentSpec, build_tables
from vesd.marching import (
    ForcingPlan,
    discrete_frac_integral,
    solve_adjoint,
    solve_state,
)
from vesd.special import MLParams, gamma_fn, mittag_leffler


@pytest.fixture(scope="module")
def small_setup():
    spec = ExponentSpec(0.4, -1.0 / 6.0, 0.5)
    tables = build_tables(spec, 16)
    fem = FemOperators.build(Mesh1D(8))
    return spec, tables, fem


class TestForcingPlan:
    def test_constructors_and_steps(self) -> None:
        samples = np.zeros((4, 7))
        assert ForcingPlan.nodal_history(samples).mode == "nodal-history"
        assert ForcingPlan.direct(samples).mode == "direct-F"
        assert ForcingPlan.nodal_history(samples).steps == 4

    def test_validation(self) -> None:
        samples = np.zeros((4, 7))
        with pytest.raises(ValueError):
            ForcingPlan("implicit", samples)
        with pytest.raises(ValueError):
            ForcingPlan.nodal_history(np.zeros(4))
        with pytest.raises(ValueError):
            ForcingPlan.nodal_history(samples, boundary=np.zeros((3, 2)))
        with pytest.raises(ValueError):
            ForcingPlan.nodal_history(samples, boundary=np.zeros((4, 3)))


class TestDiscreteFracIntegral:
    def test_zero_samples(self) -> None:
        bhat = np.array([0.5, 0.25, 0.125])
        assert discrete_frac_integral(bhat, np.zeros(3), 3) == 0.0

    def test_constant_samples_telescope(self) -> None:
        # For unit samples the sum telescopes to t_n^{1-a0} / Gamma(2 - a0).
        spec = ExponentSpec(0.4, 0.0, 1.0)
        tables = build_tables(spec, 32)
        got = discrete_frac_integral(tables.bhat, np.ones(32), 32)
        want = 1.0 / gamma_fn(1.6)
        assert got == pytest.approx(want, rel=1e-12)

    def test_linear_samples_converge(self) -> None:
        # Right-endpoint product integration of phi(t) = t approximates
        # t^{1.5} / Gamma(2.5) to first order in tau.
        want = 1.0 / gamma_fn(2.5)
        errs = []
        for N in (64, 128):
            tables = build_tables(ExponentSpec(0.5, 0.0, 1.0), N)
            t = np.arange(1, N + 1) / N
            got = discrete_frac_integral(tables.bhat, t, N)
            errs.append(abs(got - want))
        assert errs[0] <= 2e-2
        assert errs[1] < errs[0]

    def test_nodal_rows(self) -> None:
        bhat = np.array([2.0, 1.0])
        rows = np.array([[1.0, 10.0], [3.0, 30.0]])
        out = discrete_frac_integral(bhat, rows, 2)
        np.testing.assert_allclose(out, [1.0 * 1.0 + 2.0 * 3.0, 70.0])

    def test_step_range_validation(self) -> None:
        bhat = np.array([0.5, 0.25])
        with pytest.raises(ValueError):
            discrete_frac_integral(bhat, np.ones(2), 0)
        with pytest.raises(ValueError):
            discrete_frac_integral(bhat, np.ones(2), 3)
        with pytest.raises(ValueError):
            discrete_frac_integral(bhat, np.ones(4), 3)


class TestSolveState:
    def test_zero_forcing_stays_zero(self, small_setup) -> None:
        _, tables, fem = small_setup
        plan = ForcingPlan.nodal_history(np.zeros((16, 7)))
        U = solve_state(tables, fem, plan)
        assert U.shape == (17, 7)
        np.testing.assert_array_equal(U, np.zeros((17, 7)))

    def test_plan_shape_mismatches(self, small_setup) -> None:
        _, tables, fem = small_setup
        with pytest.raises(ValueError):
            solve_state(tables, fem, ForcingPlan.nodal_history(np.zeros((15, 7))))
        with pytest.raises(ValueError):
            solve_state(tables, fem, ForcingPlan.nodal_history(np.zeros((16, 6))))

    def test_refactor_paths_agree(self, small_setup) -> None:
        _, tables, fem = small_setup
        rng = np.random.default_rng(2)
        plan = ForcingPlan.nodal_history(
            rng.normal(size=(16, 7)), boundary=rng.normal(size=(16, 2))
        )
        U_cho = solve_state(tables, fem, plan)
        U_lu = solve_state(tables, fem, plan, refactor_each_step=True)
        np.testing.assert_allclose(U_lu, U_cho, rtol=1e-12, atol=1e-14)

    def test_direct_mode_replays_nodal_history(self, small_setup) -> None:
        # Feeding the accumulated discrete fractional integrals through a
        # direct-F plan reproduces the nodal-history march bit for bit.
        _, tables, fem = small_setup
        rng = np.random.default_rng(3)
        samples = rng.normal(size=(16, 7))
        boundary = rng.normal(size=(16, 2))
        F = np.stack(
            [discrete_frac_integral(tables.bhat, samples, n) for n in range(1, 17)]
        )
        Fb = np.stack(
            [discrete_frac_integral(tables.bhat, boundary, n) for n in range(1, 17)]
        )
        U_nodal = solve_state(
            tables, fem, ForcingPlan.nodal_history(samples, boundary)
        )
        U_direct = solve_state(tables, fem, ForcingPlan.direct(F, Fb))
        np.testing.assert_array_equal(U_direct, U_nodal)

    @pytest.mark.parametrize("alpha0", [0.4, 0.7, 0.95])
    @pytest.mark.parametrize("N", [64, 256])
    def test_constant_forcing_stays_bounded(self, alpha0: float, N: int) -> None:
        spec = ExponentSpec(alpha0, -1.0 / 6.0 * min(1.0, alpha0 / 0.2), 1.0)
        tables = build_tables(spec, N)
        fem = FemOperators.build(Mesh1D(32))
        plan = ForcingPlan.nodal_history(
            np.ones((N, 31)), boundary=np.ones((N, 2))
        )
        U = solve_state(tables, fem, plan)
        norms = [l2_norm_discrete(U[n], fem.mesh.h) for n in range(N + 1)]
        assert max(norms) <= 10.0

    def test_constant_exponent_series_solution(self) -> None:
        # For alpha(t) = 1/2 and forcing sin(pi x), the solution is
        # u = t E_{1/2, 2}(-pi^2 sqrt(t)) sin(pi x).  At the fixed final time
        # the march error shrinks at better-than-first order in the step
        # size, far above the fine mesh's spatial floor.
        spec = ExponentSpec(0.5, 0.0, 1.0)
        fem = FemOperators.build(Mesh1D(512))
        xs = fem.mesh.interior_nodes()
        q_row = np.sin(np.pi * xs)
        amp = mittag_leffler(MLParams(p=0.5, pbar=2.0, z=-math.pi**2))
        exact = amp * q_row
        errs = []
        for N in (16, 32):
            tables = build_tables(spec, N)
            plan = ForcingPlan.nodal_history(np.tile(q_row, (N, 1)))
            U = solve_state(tables, fem, plan)
            errs.append(l2_norm_discrete(U[-1] - exact, fem.mesh.h))
        assert errs[0] <= 3e-5
        assert errs[1] / errs[0] <= 0.5


class TestSolveAdjoint:
    def test_terminal_row_is_zero(self, small_setup) -> None:
        _, tables, fem = small_setup
        rng = np.random.default_rng(4)
        state = rng.normal(size=(17, 7))
        state[0] = 0.0
        ud = rng.normal(size=(17, 7))
        Z = solve_adjoint(tables, fem, state, ud)
        assert Z.shape == (17, 7)
        np.testing.assert_array_equal(Z[-1], np.zeros(7))

    def test_vanishes_on_perfect_tracking(self, small_setup) -> None:
        _, tables, fem = small_setup
        rng = np.random.default_rng(5)
        state = rng.normal(size=(17, 7))
        Z = solve_adjoint(tables, fem, state, state.copy())
        np.testing.assert_array_equal(Z, np.zeros((17, 7)))

    def test_time_reversal_matches_forward_march(self, small_setup) -> None:
        # With a zero state, the adjoint is the forward march on the reversed
        # mismatch rows; flipping its output must reproduce the forward run
        # exactly.
        _, tables, fem = small_setup
        rng = np.random.default_rng(6)
        s = rng.normal(size=(16, 7))
        sb = rng.normal(size=(16, 2))
        ud = np.zeros((17, 7))
        ud[:16] = -s[::-1]
        udb = np.zeros((17, 2))
        udb[:16] = -sb[::-1]
        Z = solve_adjoint(tables, fem, np.zeros((17, 7)), ud, udb)
        U = solve_state(tables, fem, ForcingPlan.nodal_history(s, sb))
        np.testing.assert_array_equal(Z[::-1], U)

    def test_shape_validation(self, small_setup) -> None:
        _, tables, fem = small_setup
        good_state = np.zeros((17, 7))
        good_ud = np.zeros((17, 7))
        with pytest.raises(ValueError):
            solve_adjoint(tables, fem, np.zeros((16, 7)), good_ud)
        with pytest.raises(ValueError):
            solve_adjoint(tables, fem, good_state, np.zeros((17, 6)))
        with pytest.raises(ValueError):
            solve_adjoint(
                tables, fem, good_state, good_ud, ud_boundary=np.zeros((16, 2))
            )
