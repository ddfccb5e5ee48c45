from __future__ import annotations

import json

import numpy as np
import pytest

from zolqr import diagnostics, lqr_core
from zolqr.errors import DegenerateSublevelError, UnstableGainError
from zolqr.pg_algorithms import RunConfig


class TestFiniteDifferenceGradient:
    def test_near_zero_at_optimum(self, benchmark):
        # differences of ~1e-14-accurate costs divided by 2h floor the result
        # around eps * C / h ~ 1.5e-6 here; anything <= 1e-5 is stationary
        # (the initial gain's gradient norm is ~372)
        system, _, _ = benchmark
        _, best = lqr_core.optimal_gain(system)
        fd = diagnostics.finite_difference_gradient(system, best, 1e-6)
        assert np.linalg.norm(fd, "fro") <= 1e-5

    def test_destabilizing_probe_step_raises(self, benchmark):
        system, _, _ = benchmark
        _, best = lqr_core.optimal_gain(system)
        with pytest.raises(UnstableGainError):
            diagnostics.finite_difference_gradient(system, best, 10.0)


@pytest.fixture(scope="module")
def reports(benchmark):
    system, gain, _ = benchmark
    return {
        radius: diagnostics.estimator_bias_probe(
            system, gain, radius, sample_count=100_000, seed=1234
        )
        for radius in (1e-1, 1e-2, 1e-3)
    }


@pytest.fixture(scope="module")
def probe_config():
    return RunConfig(
        algorithm="svrpg", step_size=1e-4, epochs=1, inner_steps=1,
        samples=50, inner_samples=25, outer_radius=1e-4, inner_radius=5e-2,
    )


class TestEstimatorBiasProbe:
    def test_bias_decreases_with_radius(self, reports):
        biases = {r: reports[r].scalars["zo2p_bias_norm"] for r in reports}
        assert biases[1e-2] < biases[1e-1]
        assert biases[1e-3] <= biases[1e-1]

    def test_one_and_two_point_means_agree(self, reports):
        for report in reports.values():
            assert report.scalars["mean_equality_max_z"] <= 4.0

    def test_second_moment_diagnostic_finite(self, reports):
        for report in reports.values():
            assert np.isfinite(report.scalars["second_moment_ratio"])
            assert report.scalars["zo2p_second_moment"] > 0

    def test_reproducible_from_seed(self, benchmark, reports):
        system, gain, _ = benchmark
        again = diagnostics.estimator_bias_probe(
            system, gain, 1e-2, sample_count=100_000, seed=1234
        )
        assert again.to_json() == reports[1e-2].to_json()


class TestGradientDominationProbe:
    def test_benchmark_floor_positive(self, benchmark):
        system, gain, _ = benchmark
        _, best = lqr_core.optimal_gain(system)
        report = diagnostics.gradient_domination_probe(system, best, gain, 500, seed=4242)
        assert report.scalars["lambda_hat"] > 0
        assert report.scalars["acceptance_rate"] >= 0.10

    def test_scalar_system_matches_closed_form_scan(self, scalar_system):
        _, best = lqr_core.optimal_gain(scalar_system)
        report = diagnostics.gradient_domination_probe(
            scalar_system, best, np.array([[0.7]]), 300, seed=7
        )
        assert report.scalars["lambda_hat"] > 0
        # independent closed-form scan over the gain interval
        scan_floor = np.inf
        for k in np.linspace(-0.2, 0.8, 2001):
            value = (1.0 + k * k) / (1.0 - (0.5 - k) ** 2)
            best_value = lqr_core.cost(scalar_system, best)
            if value - best_value <= 1e-12:
                continue
            sigma = 1.0 / (1.0 - (0.5 - k) ** 2)
            grad = 2.0 * ((1.0 + value) * k - value * 0.5) * sigma
            scan_floor = min(scan_floor, grad * grad / (value - best_value))
        assert scan_floor > 0

    def test_collapsed_sublevel_rejected(self, benchmark):
        system, _, _ = benchmark
        _, best = lqr_core.optimal_gain(system)
        with pytest.raises(DegenerateSublevelError):
            diagnostics.gradient_domination_probe(system, best, best, 100, seed=0)


class TestVarianceReductionProbe:
    def test_small_displacement_reduces_variance(self, benchmark, probe_config):
        system, gain, _ = benchmark
        report = diagnostics.variance_reduction_probe(
            system, gain, 1e-3, probe_config, repeats=400, seed=2024
        )
        assert report.scalars["variance_ratio"] < 1.0

    def test_zero_displacement_degenerates_to_anchor(self, benchmark, probe_config):
        system, gain, _ = benchmark
        report = diagnostics.variance_reduction_probe(
            system, gain, 0.0, probe_config, repeats=100, seed=5
        )
        # v is exactly the two-point anchor estimate, far tamer than one-point
        assert report.scalars["variance_ratio"] < 1.0
        assert report.scalars["trace_var_direction"] > 0


class TestLocalLipschitzProbe:
    def test_benchmark_slopes_reported(self, benchmark):
        system, gain, _ = benchmark
        report = diagnostics.local_lipschitz_probe(system, gain, 1e-3, pairs=200, seed=9)
        assert report.scalars["max_abs_slope"] > 0
        assert report.scalars["rejected_directions"] == 0
        again = diagnostics.local_lipschitz_probe(system, gain, 1e-3, pairs=200, seed=9)
        assert again.to_json() == report.to_json()


class TestProbeReport:
    def test_serialization_shape(self, benchmark):
        system, gain, _ = benchmark
        report = diagnostics.local_lipschitz_probe(system, gain, 1e-3, pairs=20, seed=3)
        payload = json.loads(report.to_json())
        assert set(payload) == {"name", "scalars", "sample_count", "seed"}
        assert payload["name"] == "local_lipschitz"

    def test_non_finite_scalars_rejected(self):
        with pytest.raises(ValueError):
            diagnostics.ProbeReport("bad", {"value": float("nan")}, 1, 0)
