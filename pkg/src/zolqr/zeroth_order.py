"""Sphere-perturbation sampling and one-/two-point gradient estimators.

Perturbations are uniform on the Frobenius sphere of a given radius.  The
one-point estimator averages ``d * C(K + U_i) * U_i / r^2``; the two-point
estimator averages ``d * (C(K + U_i) - C(K - U_i)) * U_i / (2 r^2)``, with
``d = n_x * n_u``.  The paired estimator evaluates two centers on one shared
perturbation set, which is what makes the variance-reduced update direction
a control variate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from zolqr.cost_oracle import QueryLedger
from zolqr.errors import DestabilizedQueryError

ZO1P = "zo1p"
ZO2P = "zo2p"
SVRPG_DIRECTION = "svrpg_direction"

# Resampling threshold for the measure-zero event of a ~zero Gaussian draw.
_MIN_DRAW_NORM = 1e-300


@dataclass(frozen=True)
class Perturbation:
    """A direction on the Frobenius sphere of radius ``radius``."""

    matrix: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.matrix, "fro"))
        if abs(norm - self.radius) > 1e-12 * self.radius:
            raise ValueError(f"perturbation norm {norm!r} does not match radius {self.radius!r}")


@dataclass(frozen=True)
class GradientEstimate:
    """A gradient estimate plus the metadata needed for query accounting."""

    matrix: np.ndarray
    method: str
    samples: int
    radius: float
    queries_consumed: QueryLedger

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("gradient estimate contains non-finite entries")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, "fro"))


def sample_sphere_batch(
    n_u: int, n_x: int, radius: float, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``count`` i.i.d. perturbations uniform on the radius-r sphere.

    Normalized Gaussian construction: ``U = r Z / ||Z||_F`` with standard
    normal ``Z``; near-zero draws are redrawn.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    draws = rng.standard_normal((count, n_u, n_x))
    norms = np.sqrt((draws * draws).sum(axis=(1, 2)))
    for i in np.flatnonzero(norms < _MIN_DRAW_NORM):
        while norms[i] < _MIN_DRAW_NORM:
            draws[i] = rng.standard_normal((n_u, n_x))
            norms[i] = np.linalg.norm(draws[i], "fro")
    return radius * draws / norms[:, None, None]


def sample_sphere(n_u: int, n_x: int, radius: float, rng: np.random.Generator) -> Perturbation:
    """Draw one perturbation uniform on the Frobenius sphere of radius r."""
    return Perturbation(sample_sphere_batch(n_u, n_x, radius, 1, rng)[0], radius)


def _stable_costs(
    oracle,
    centers_and_signs: list[tuple[np.ndarray, float]],
    perturbations: np.ndarray,
    radius: float,
    rng: np.random.Generator,
    ledger: QueryLedger,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Evaluate every (center + sign * U_i) pair, redrawing rejected samples.

    Under a resample policy a destabilizing sample is replaced by a fresh
    draw (the shared set stays shared across centers) and all attempts stay
    charged; under abort the oracle raises; under penalty nothing is
    retryable.  Returns the final perturbation set and one cost row per
    center.
    """
    count = perturbations.shape[0]
    n_u, n_x = perturbations.shape[1], perturbations.shape[2]
    rows = [np.empty(count) for _ in centers_and_signs]
    pending = list(range(count))
    attempts = np.zeros(count, dtype=int)
    max_retries = getattr(getattr(oracle, "policy", None), "max_retries", 0)
    while pending:
        rejected: set[int] = set()
        for row, (center, sign) in zip(rows, centers_and_signs):
            points = center[None, :, :] + sign * perturbations[pending]
            values, retry = oracle.query_batch(points, rng, ledger)
            row[pending] = values
            rejected.update(pending[j] for j in retry)
        if not rejected:
            break
        for index in sorted(rejected):
            attempts[index] += 1
            if attempts[index] > max_retries:
                raise DestabilizedQueryError(
                    f"sample {index} still destabilizing after {max_retries} redraws"
                )
            perturbations[index] = sample_sphere_batch(n_u, n_x, radius, 1, rng)[0]
        pending = sorted(rejected)
    return perturbations, rows


def _weighted_mean(weights: np.ndarray, perturbations: np.ndarray, scale: float) -> np.ndarray:
    return scale * np.einsum("i,ijk->jk", weights, perturbations)


def zo1p_estimate(
    oracle,
    gain: np.ndarray,
    radius: float,
    samples: int,
    rng: np.random.Generator,
    ledger: QueryLedger,
) -> GradientEstimate:
    """One-point estimate at ``gain``; consumes ``samples`` evaluations."""
    gain = np.asarray(gain, dtype=np.float64)
    n_u, n_x = gain.shape
    before = ledger.copy()
    perturbations = sample_sphere_batch(n_u, n_x, radius, samples, rng)
    perturbations, (costs,) = _stable_costs(
        oracle, [(gain, 1.0)], perturbations, radius, rng, ledger
    )
    dim = n_u * n_x
    matrix = _weighted_mean(costs, perturbations, dim / (samples * radius * radius))
    return GradientEstimate(matrix, ZO1P, samples, radius, ledger.delta_since(before))


def zo2p_estimate(
    oracle,
    gain: np.ndarray,
    radius: float,
    samples: int,
    rng: np.random.Generator,
    ledger: QueryLedger,
) -> GradientEstimate:
    """Two-point estimate at ``gain``; consumes ``2 * samples`` evaluations,
    recorded as ``samples`` two-point queries."""
    gain = np.asarray(gain, dtype=np.float64)
    n_u, n_x = gain.shape
    before = ledger.copy()
    perturbations = sample_sphere_batch(n_u, n_x, radius, samples, rng)
    perturbations, (plus, minus) = _stable_costs(
        oracle, [(gain, 1.0), (gain, -1.0)], perturbations, radius, rng, ledger
    )
    ledger.convert_pairs(samples)
    dim = n_u * n_x
    matrix = _weighted_mean(plus - minus, perturbations, dim / (2.0 * samples * radius * radius))
    return GradientEstimate(matrix, ZO2P, samples, radius, ledger.delta_since(before))


def zo1p_pair_estimate(
    oracle,
    gain: np.ndarray,
    gain_ref: np.ndarray,
    radius: float,
    samples: int,
    rng: np.random.Generator,
    ledger: QueryLedger,
) -> tuple[GradientEstimate, GradientEstimate]:
    """One-point estimates at two gains sharing one perturbation set.

    Consumes ``2 * samples`` evaluations (all one-point).  If the two gains
    are identical the two outputs are bitwise identical, which is what makes
    the variance-reduced correction vanish at an epoch anchor.
    """
    gain = np.asarray(gain, dtype=np.float64)
    gain_ref = np.asarray(gain_ref, dtype=np.float64)
    n_u, n_x = gain.shape
    before = ledger.copy()
    perturbations = sample_sphere_batch(n_u, n_x, radius, samples, rng)
    perturbations, (costs_at, costs_ref) = _stable_costs(
        oracle, [(gain, 1.0), (gain_ref, 1.0)], perturbations, radius, rng, ledger
    )
    delta = ledger.delta_since(before)
    dim = n_u * n_x
    scale = dim / (samples * radius * radius)
    estimate_at = GradientEstimate(
        _weighted_mean(costs_at, perturbations, scale), ZO1P, samples, radius, delta
    )
    estimate_ref = GradientEstimate(
        _weighted_mean(costs_ref, perturbations, scale), ZO1P, samples, radius, delta
    )
    return estimate_at, estimate_ref
