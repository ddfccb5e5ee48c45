from __future__ import annotations

import numpy as np
import pytest

from helpers import fixed_point_lyapunov, random_stabilizing_pair
from zolqr import diagnostics, lqr_core
from zolqr.errors import (
    DegenerateBaselineError,
    DimensionMismatchError,
    InvalidSystemError,
    UnstableGainError,
)
from zolqr.lqr_core import LinearQuadraticSystem

# closed forms for the scalar system a=0.5, b=1, q=1, r=1, sigma0=1 at k=0.2
SCALAR_VALUE_AT_02 = 1.04 / 0.91
SCALAR_GRADIENT_AT_02 = 2.0 * ((1.0 + SCALAR_VALUE_AT_02) * 0.2 - SCALAR_VALUE_AT_02 * 0.5) / 0.91


class TestSystemValidation:
    def test_non_pd_q_named(self):
        with pytest.raises(InvalidSystemError, match="Q not positive definite"):
            LinearQuadraticSystem(a=[[0.5]], b=[[1.0]], q=[[-1.0]], r=[[1.0]])

    def test_non_pd_r_named(self):
        with pytest.raises(InvalidSystemError, match="R not positive definite"):
            LinearQuadraticSystem(a=[[0.5]], b=[[1.0]], q=[[1.0]], r=[[0.0]])

    def test_mismatched_b_rows(self):
        with pytest.raises(InvalidSystemError, match="B has"):
            LinearQuadraticSystem(a=np.eye(3) * 0.5, b=np.ones((2, 1)), q=np.eye(3), r=[[1.0]])

    def test_sigma0_must_be_psd(self):
        with pytest.raises(InvalidSystemError, match="Sigma0"):
            LinearQuadraticSystem(
                a=[[0.5]], b=[[1.0]], q=[[1.0]], r=[[1.0]], sigma0=[[-0.1]]
            )

    def test_sigma0_defaults_to_identity(self):
        system = LinearQuadraticSystem(a=[[0.5]], b=[[1.0]], q=[[1.0]], r=[[1.0]])
        np.testing.assert_array_equal(system.sigma0, np.eye(1))


class TestStability:
    def test_benchmark_initial_gain_stabilizes(self, benchmark):
        system, gain, _ = benchmark
        assert lqr_core.is_stabilizing(system, gain)

    def test_benchmark_open_loop_unstable(self, benchmark):
        system, _, _ = benchmark
        assert not lqr_core.is_stabilizing(system, np.zeros((1, 3)))

    def test_scalar_closed_loop(self, scalar_system):
        assert lqr_core.is_stabilizing(scalar_system, [[0.2]])

    def test_gain_shape_checked(self, benchmark):
        system, _, _ = benchmark
        with pytest.raises(DimensionMismatchError):
            lqr_core.is_stabilizing(system, np.zeros((2, 3)))


class TestValueAndCost:
    def test_zero_gain_zero_loop(self):
        system = LinearQuadraticSystem(a=[[0.0]], b=[[1.0]], q=[[1.0]], r=[[1.0]])
        assert lqr_core.value_matrix(system, [[0.0]])[0, 0] == pytest.approx(1.0)

    def test_scalar_closed_form(self, scalar_system):
        assert lqr_core.value_matrix(scalar_system, [[0.2]])[0, 0] == pytest.approx(
            SCALAR_VALUE_AT_02, rel=1e-12
        )
        assert lqr_core.cost(scalar_system, [[0.2]]) == pytest.approx(
            SCALAR_VALUE_AT_02, rel=1e-12
        )

    def test_benchmark_value_matrix_residual(self, benchmark):
        system, gain, _ = benchmark
        p = lqr_core.value_matrix(system, gain)
        oracle = fixed_point_lyapunov(
            system.a - system.b @ gain, system.q + gain.T @ system.r @ gain
        )
        np.testing.assert_allclose(p, oracle, rtol=1e-10)
        assert lqr_core.cost(system, gain) == pytest.approx(np.trace(oracle), rel=1e-10)

    def test_unstable_gain_raises(self, benchmark):
        system, _, _ = benchmark
        with pytest.raises(UnstableGainError):
            lqr_core.value_matrix(system, np.zeros((1, 3)))

    def test_fixed_state_cost(self, scalar_system, benchmark):
        assert lqr_core.cost_from_initial_state(scalar_system, [[0.2]], [0.0]) == 0.0
        assert lqr_core.cost_from_initial_state(scalar_system, [[0.2]], [1.0]) == pytest.approx(
            SCALAR_VALUE_AT_02, rel=1e-12
        )
        system, gain, x0 = benchmark
        p = lqr_core.value_matrix(system, gain)
        assert lqr_core.cost_from_initial_state(system, gain, x0) == pytest.approx(
            p.sum(), rel=1e-12
        )

    def test_optimal_gain_minimizes_cost(self, benchmark):
        system, _, _ = benchmark
        _, best = lqr_core.optimal_gain(system)
        best_cost = lqr_core.cost(system, best)
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 1000:
            candidate = best + 0.05 * rng.standard_normal(best.shape)
            if not lqr_core.is_stabilizing(system, candidate):
                continue
            assert lqr_core.cost(system, candidate) >= best_cost
            checked += 1


class TestExactGradient:
    def test_stationary_at_optimum(self, benchmark):
        system, _, _ = benchmark
        _, best = lqr_core.optimal_gain(system)
        assert np.linalg.norm(lqr_core.exact_gradient(system, best), "fro") <= 1e-8

    def test_scalar_closed_form(self, scalar_system):
        value = lqr_core.exact_gradient(scalar_system, [[0.2]])[0, 0]
        assert value == pytest.approx(SCALAR_GRADIENT_AT_02, rel=1e-12)
        assert value == pytest.approx(-0.31397, abs=1e-5)
        fd = diagnostics.finite_difference_gradient(scalar_system, [[0.2]], 1e-7)
        assert value == pytest.approx(fd[0, 0], rel=1e-6)

    def test_benchmark_matches_finite_differences(self, benchmark):
        system, gain, _ = benchmark
        exact = lqr_core.exact_gradient(system, gain)
        fd = diagnostics.finite_difference_gradient(system, gain, 1e-6)
        rel = np.linalg.norm(exact - fd, "fro") / np.linalg.norm(exact, "fro")
        assert rel <= 1e-5

    def test_random_instances_match_finite_differences(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            n_x = int(rng.integers(1, 5))
            n_u = int(rng.integers(1, 4))
            system, gain = random_stabilizing_pair(rng, n_x, n_u)
            exact = lqr_core.exact_gradient(system, gain)
            if np.linalg.norm(exact, "fro") < 1e-6:
                continue
            step = 1e-6 * (1.0 + np.linalg.norm(gain, "fro"))
            fd = diagnostics.finite_difference_gradient(system, gain, step)
            rel = np.linalg.norm(exact - fd, "fro") / np.linalg.norm(exact, "fro")
            assert rel <= 1e-4


class TestNormalizedGap:
    def test_endpoints(self, benchmark):
        system, gain0, x0 = benchmark
        _, best = lqr_core.optimal_gain(system)
        assert lqr_core.normalized_gap(system, gain0, gain0, best, x0) == pytest.approx(1.0)
        assert lqr_core.normalized_gap(system, best, gain0, best, x0) == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_baseline(self, benchmark):
        system, _, x0 = benchmark
        _, best = lqr_core.optimal_gain(system)
        with pytest.raises(DegenerateBaselineError):
            lqr_core.normalized_gap(system, best, best, best, x0)
