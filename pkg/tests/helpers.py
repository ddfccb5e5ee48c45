"""Shared test utilities: independent oracles and random instance generators.

The oracles here deliberately avoid the implementation paths they check:
the Lyapunov oracle iterates the defining fixed point, and random instances
are validated with numpy eigenvalues only.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from zolqr.lqr_core import LinearQuadraticSystem

REPO_ROOT = Path(__file__).resolve().parent.parent
BENCHMARK_SYSTEM = REPO_ROOT / "benchmarks" / "appendix_g.json"
BENCHMARK_EXPERIMENT = REPO_ROOT / "benchmarks" / "budget_comparison.json"


def fixed_point_lyapunov(coeff, rhs, tol=1e-12, max_iter=1_000_000) -> np.ndarray:
    """Independent Lyapunov oracle: iterate P <- rhs + coeff^T P coeff."""
    coeff = np.asarray(coeff, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    solution = rhs.copy()
    for _ in range(max_iter):
        updated = rhs + coeff.T @ solution @ coeff
        if np.abs(updated - solution).max() <= tol * (1.0 + np.abs(updated).max()):
            return updated
        solution = updated
    raise AssertionError("oracle fixed-point iteration did not converge")


def numpy_spectral_radius(matrix) -> float:
    return float(np.abs(np.linalg.eigvals(np.asarray(matrix, dtype=np.float64))).max())


def random_stable_matrix(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    matrix = rng.standard_normal((n, n))
    return matrix * (radius / max(numpy_spectral_radius(matrix), 1e-12))


def random_system(rng: np.random.Generator, n_x: int, n_u: int) -> LinearQuadraticSystem:
    a = rng.standard_normal((n_x, n_x))
    a *= rng.uniform(0.3, 1.8) / max(numpy_spectral_radius(a), 1e-12)
    b = rng.standard_normal((n_x, n_u))
    gq = rng.standard_normal((n_x, n_x))
    gr = rng.standard_normal((n_u, n_u))
    gs = rng.standard_normal((n_x, n_x))
    return LinearQuadraticSystem(
        a=a,
        b=b,
        q=gq @ gq.T + np.eye(n_x),
        r=gr @ gr.T + np.eye(n_u),
        sigma0=gs @ gs.T / n_x + np.eye(n_x),
    )


def random_stabilizing_pair(
    rng: np.random.Generator, n_x: int, n_u: int, spread: float = 0.3
) -> tuple[LinearQuadraticSystem, np.ndarray]:
    """A random system with a comfortably stabilizing, non-optimal gain."""
    from zolqr import lqr_core

    while True:
        system = random_system(rng, n_x, n_u)
        _, best = lqr_core.optimal_gain(system)
        for _ in range(40):
            gain = best + spread * rng.standard_normal(best.shape)
            if numpy_spectral_radius(system.a - system.b @ gain) < 0.95:
                return system, gain


def log_line_fit_r2(xs, ys) -> float:
    """Coefficient of determination of a straight-line fit to log(ys)."""
    xs = np.asarray(xs, dtype=np.float64)
    logs = np.log(np.asarray(ys, dtype=np.float64))
    coeffs = np.polyfit(xs, logs, 1)
    predicted = np.polyval(coeffs, xs)
    ss_res = float(((logs - predicted) ** 2).sum())
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot
