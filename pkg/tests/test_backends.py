"""Consistency of the compiled kernels against the numpy fallback."""

from __future__ import annotations

import numpy as np
import pytest

from helpers import numpy_spectral_radius, random_stable_matrix
from zolqr import _kernels_py

compiled = pytest.importorskip("zolqr._kernels", reason="compiled extension not built")


class TestSpectralRadiusAgreement:
    def test_random_matrices(self):
        rng = np.random.default_rng(100)
        for _ in range(300):
            n = int(rng.integers(1, 10))
            matrix = rng.standard_normal((n, n)) * rng.uniform(0.1, 8.0)
            a = compiled.spectral_radius(matrix)
            b = _kernels_py.spectral_radius(matrix)
            assert a == pytest.approx(b, rel=1e-11, abs=1e-12)

    def test_structured_matrices(self):
        cases = [
            np.zeros((3, 3)),
            np.triu(np.ones((4, 4)), 1),          # nilpotent
            np.array([[0.0, -2.0], [2.0, 0.0]]),  # purely imaginary pair
            np.diag([1.0, 1.0, 1.0]) + np.diag([1.0, 1.0], 1),  # defective
            np.array([[-3.5]]),
        ]
        for matrix in cases:
            assert compiled.spectral_radius(matrix) == pytest.approx(
                numpy_spectral_radius(matrix), abs=1e-12
            )


class TestLyapunovAgreement:
    def test_random_stable_instances(self):
        rng = np.random.default_rng(200)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            coeff = random_stable_matrix(rng, n, rng.uniform(0.05, 0.95))
            g = rng.standard_normal((n, n))
            rhs = g @ g.T
            a = compiled.solve_discrete_lyapunov(coeff, rhs)
            b = _kernels_py.solve_discrete_lyapunov(coeff, rhs)
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


class TestBatchCostAgreement:
    def test_mixed_stable_unstable_batch(self, benchmark):
        system, gain, _ = benchmark
        rng = np.random.default_rng(300)
        gains = gain[None] + 0.3 * rng.standard_normal((128, 1, 3))
        args = (system.a, system.b, system.q, system.r, system.sigma0, gains, 1e-12)
        costs_c, rhos_c = compiled.closed_loop_cost_batch(*args)
        costs_p, rhos_p = _kernels_py.closed_loop_cost_batch(*args)
        np.testing.assert_array_equal(np.isnan(costs_c), np.isnan(costs_p))
        assert np.isnan(costs_c).any() and not np.isnan(costs_c).all()
        stable = ~np.isnan(costs_c)
        np.testing.assert_allclose(costs_c[stable], costs_p[stable], rtol=1e-9)
        np.testing.assert_allclose(rhos_c, rhos_p, rtol=1e-10, atol=1e-12)

    def test_empty_batch(self, benchmark):
        system, _, _ = benchmark
        costs, rhos = compiled.closed_loop_cost_batch(
            system.a, system.b, system.q, system.r, system.sigma0,
            np.empty((0, 1, 3)), 1e-12,
        )
        assert costs.shape == (0,) and rhos.shape == (0,)
