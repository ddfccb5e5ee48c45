"""Independent verification oracles and seeded statistical probes.

These back the package's correctness story: finite differences check the
closed-form gradient, Monte-Carlo probes measure estimator bias/variance,
and landscape probes report empirical gradient-domination and local
Lipschitz surrogates.  Every probe is reproducible bitwise from its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from zolqr import lqr_core, zeroth_order
from zolqr.cost_oracle import CostOracle, QueryLedger
from zolqr.errors import DegenerateSublevelError, UnstableGainError
from zolqr.lqr_core import LinearQuadraticSystem


@dataclass(frozen=True)
class ProbeReport:
    """Named scalar outputs of one probe run."""

    name: str
    scalars: dict[str, float]
    sample_count: int
    seed: int

    def __post_init__(self) -> None:
        for key, value in self.scalars.items():
            if not np.isfinite(value):
                raise ValueError(f"probe scalar {key!r} is not finite: {value!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "scalars": {k: float(v) for k, v in sorted(self.scalars.items())},
                "sample_count": self.sample_count,
                "seed": self.seed,
            },
            indent=2,
            sort_keys=True,
        )


def finite_difference_gradient(
    system: LinearQuadraticSystem, gain, step: float = 1e-6
) -> np.ndarray:
    """Entrywise central differences of the expected cost.

    Test oracle for :func:`zolqr.lqr_core.exact_gradient`; raises
    :class:`UnstableGainError` if any perturbed gain destabilizes (callers
    should shrink ``step``).
    """
    k = lqr_core.check_gain(system, gain)
    out = np.empty_like(k)
    for i in range(k.shape[0]):
        for j in range(k.shape[1]):
            bump = np.zeros_like(k)
            bump[i, j] = step
            out[i, j] = (
                lqr_core.cost(system, k + bump) - lqr_core.cost(system, k - bump)
            ) / (2.0 * step)
    return out


def estimator_bias_probe(
    system: LinearQuadraticSystem,
    gain,
    radius: float,
    sample_count: int,
    seed: int,
) -> ProbeReport:
    """Measure one- and two-point estimator bias against the exact gradient.

    Uses the exact oracle with ``sample_count`` independent draws per
    estimator (separate draws for the two estimators so their mean
    difference has the nominal standard error).  Also reports the
    single-sample two-point second moment and its ratio against the
    ``8 d^2 bias^2 + 2 d^2 ||grad||^2`` envelope with the measured bias as
    surrogate for the unknown smoothing constant.
    """
    k = lqr_core.check_gain(system, gain)
    n_u, n_x = k.shape
    dim = n_u * n_x
    exact = lqr_core.exact_gradient(system, k)
    oracle = CostOracle(system)
    rng = np.random.default_rng(seed)
    ledger = QueryLedger()

    draws_one = zeroth_order.sample_sphere_batch(n_u, n_x, radius, sample_count, rng)
    costs_one, _ = oracle.query_batch(k[None] + draws_one, rng, ledger)
    samples_one = (dim / radius**2) * costs_one[:, None, None] * draws_one

    draws_two = zeroth_order.sample_sphere_batch(n_u, n_x, radius, sample_count, rng)
    plus, _ = oracle.query_batch(k[None] + draws_two, rng, ledger)
    minus, _ = oracle.query_batch(k[None] - draws_two, rng, ledger)
    samples_two = (dim / (2.0 * radius**2)) * (plus - minus)[:, None, None] * draws_two

    mean_one = samples_one.mean(axis=0)
    mean_two = samples_two.mean(axis=0)
    se_one = samples_one.std(axis=0, ddof=1) / np.sqrt(sample_count)
    se_two = samples_two.std(axis=0, ddof=1) / np.sqrt(sample_count)
    z = np.abs(mean_one - mean_two) / np.sqrt(se_one**2 + se_two**2)

    bias_two = float(np.linalg.norm(mean_two - exact, "fro"))
    second_moment = float((samples_two**2).sum(axis=(1, 2)).mean())
    envelope = 8.0 * dim**2 * bias_two**2 + 2.0 * dim**2 * float(
        np.linalg.norm(exact, "fro") ** 2
    )
    return ProbeReport(
        name="estimator_bias",
        scalars={
            "radius": radius,
            "zo1p_bias_norm": float(np.linalg.norm(mean_one - exact, "fro")),
            "zo2p_bias_norm": bias_two,
            "zo1p_stderr_norm": float(np.linalg.norm(se_one, "fro")),
            "zo2p_stderr_norm": float(np.linalg.norm(se_two, "fro")),
            "mean_equality_max_z": float(z.max()),
            "zo2p_second_moment": second_moment,
            "second_moment_ratio": second_moment / envelope,
        },
        sample_count=sample_count,
        seed=seed,
    )


def gradient_domination_probe(
    system: LinearQuadraticSystem,
    best_gain,
    baseline_gain,
    grid_size: int,
    seed: int,
) -> ProbeReport:
    """Empirical curvature floor over the baseline sublevel set.

    Samples stabilizing gains with cost at most the baseline's (rejection
    sampling along the segment between the optimal and baseline gains plus
    random orthogonal offsets) and reports the minimum observed ratio
    ``||grad C(K)||_F^2 / (C(K) - C(K_best))``.
    """
    best = lqr_core.check_gain(system, best_gain)
    base = lqr_core.check_gain(system, baseline_gain)
    rng = np.random.default_rng(seed)
    baseline_cost = lqr_core.cost(system, base)
    best_cost = lqr_core.cost(system, best)
    segment = base - best
    span = float(np.linalg.norm(segment, "fro"))

    max_proposals = 10 * grid_size
    accepted = 0
    proposals = 0
    ratio_floor = np.inf
    excluded = 0
    while accepted < grid_size and proposals < max_proposals:
        proposals += 1
        along = rng.uniform()
        offset = rng.standard_normal(best.shape)
        offset /= np.linalg.norm(offset, "fro")
        candidate = best + along * segment + rng.uniform(0.0, span) * offset
        if not lqr_core.is_stabilizing(system, candidate):
            continue
        candidate_cost = lqr_core.cost(system, candidate)
        if candidate_cost > baseline_cost:
            continue
        accepted += 1
        denom = candidate_cost - best_cost
        if denom <= 1e-12:
            excluded += 1
            continue
        ratio = float(np.linalg.norm(lqr_core.exact_gradient(system, candidate), "fro") ** 2)
        ratio_floor = min(ratio_floor, ratio / denom)
    if accepted < grid_size:
        raise DegenerateSublevelError(
            f"only {accepted}/{grid_size} proposals accepted after {proposals} draws"
        )
    if not np.isfinite(ratio_floor):
        raise DegenerateSublevelError(
            "every accepted sample sits at the optimum; the sublevel set has collapsed"
        )
    return ProbeReport(
        name="gradient_domination",
        scalars={
            "lambda_hat": float(ratio_floor),
            "acceptance_rate": accepted / proposals,
            "excluded_near_optimal": float(excluded),
        },
        sample_count=grid_size,
        seed=seed,
    )


def variance_reduction_probe(
    system: LinearQuadraticSystem,
    anchor_gain,
    displacement: float,
    config,
    repeats: int,
    seed: int,
) -> ProbeReport:
    """Compare the variance of the control-variate direction with plain one-point.

    Rebuilds ``v = anchor_estimate + (onepoint(K) - onepoint(K_anchor))``
    (shared samples) ``repeats`` times at ``K = anchor + displacement * V``
    and contrasts the total variance with a plain one-point estimate at K
    using the same inner sample budget.
    """
    anchor = lqr_core.check_gain(system, anchor_gain)
    rng = np.random.default_rng(seed)
    if displacement > 0:
        direction = rng.standard_normal(anchor.shape)
        direction /= np.linalg.norm(direction, "fro")
        displaced = anchor + displacement * direction
    else:
        displaced = anchor.copy()
    if not lqr_core.is_stabilizing(system, displaced):
        raise UnstableGainError("displaced gain leaves the stabilizing set")

    oracle = CostOracle(system)
    variance_directions = []
    plain_estimates = []
    for _ in range(repeats):
        ledger = QueryLedger()
        anchor_est = zeroth_order.zo2p_estimate(
            oracle, anchor, config.outer_radius, config.samples, rng, ledger
        )
        at_current, at_anchor = zeroth_order.zo1p_pair_estimate(
            oracle, displaced, anchor, config.inner_radius, config.inner_samples, rng, ledger
        )
        variance_directions.append(
            anchor_est.matrix + (at_current.matrix - at_anchor.matrix)
        )
        plain = zeroth_order.zo1p_estimate(
            oracle, displaced, config.inner_radius, config.inner_samples, rng, ledger
        )
        plain_estimates.append(plain.matrix)
    stacked_v = np.array(variance_directions)
    stacked_plain = np.array(plain_estimates)
    trace_var_v = float(stacked_v.var(axis=0, ddof=1).sum())
    trace_var_plain = float(stacked_plain.var(axis=0, ddof=1).sum())
    return ProbeReport(
        name="variance_reduction",
        scalars={
            "displacement": displacement,
            "trace_var_direction": trace_var_v,
            "trace_var_onepoint": trace_var_plain,
            "variance_ratio": trace_var_v / trace_var_plain,
        },
        sample_count=repeats,
        seed=seed,
    )


def local_lipschitz_probe(
    system: LinearQuadraticSystem,
    gain,
    displacement: float,
    pairs: int,
    seed: int,
) -> ProbeReport:
    """Empirical cost-slope bound over random small gain moves.

    Reports the largest and mean observed ``|C(K') - C(K)| / ||K' - K||_F``
    over ``pairs`` random directions of norm ``displacement``, plus the same
    slope normalized by ``C(K)``.  No fixed constant is asserted; this is a
    reported diagnostic.
    """
    k = lqr_core.check_gain(system, gain)
    rng = np.random.default_rng(seed)
    base_cost = lqr_core.cost(system, k)
    slopes = []
    rejected = 0
    for _ in range(pairs):
        direction = rng.standard_normal(k.shape)
        direction /= np.linalg.norm(direction, "fro")
        moved = k + displacement * direction
        if not lqr_core.is_stabilizing(system, moved):
            rejected += 1
            continue
        slopes.append(abs(lqr_core.cost(system, moved) - base_cost) / displacement)
    if not slopes:
        raise UnstableGainError("every probed direction left the stabilizing set")
    slopes_arr = np.asarray(slopes)
    return ProbeReport(
        name="local_lipschitz",
        scalars={
            "displacement": displacement,
            "max_abs_slope": float(slopes_arr.max()),
            "mean_abs_slope": float(slopes_arr.mean()),
            "max_relative_slope": float(slopes_arr.max() / base_cost),
            "rejected_directions": float(rejected),
        },
        sample_count=pairs,
        seed=seed,
    )
