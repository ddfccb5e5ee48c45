"""Policy-gradient optimizer loops with stability auditing and trace emission.

Four loops share one update rule ``K <- K - step_size * direction``:

* ``exact_pg`` uses the model-based gradient (no oracle queries),
* ``zo1p_pg`` / ``zo2p_pg`` use one-point / two-point estimates each step,
* ``svrpg`` alternates a two-point anchor estimate per epoch with cheap
  shared-sample one-point corrections inside the epoch, so the expensive
  paired queries are needed only periodically.

Every iterate is audited for closed-loop stability before the next oracle
use; an unstable iterate terminates the run without emitting a record.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from zolqr import dense_linalg, lqr_core, zeroth_order
from zolqr.cost_oracle import (
    CostOracle,
    DivergencePolicy,
    OracleMode,
    QueryLedger,
    divergence_policy_with_default,
    oracle_mode_with_default,
)
from zolqr.errors import ConfigError, DestabilizedQueryError, UnstableGainError
from zolqr.lqr_core import STABILITY_MARGIN, LinearQuadraticSystem

EXACT_PG = "exact_pg"
ZO1P_PG = "zo1p_pg"
ZO2P_PG = "zo2p_pg"
SVRPG = "svrpg"

ALGORITHMS = (EXACT_PG, ZO1P_PG, ZO2P_PG, SVRPG)


@dataclass(frozen=True)
class RunConfig:
    """Hyperparameters for one optimizer run.

    ``iterations``/``samples``/``radius`` drive the single-loop algorithms;
    ``epochs``/``inner_steps``/``samples``/``inner_samples`` and the two
    radii drive the dual-loop one (``samples`` is the anchor sample count).
    Positive step sizes and radii are accepted as-is; nothing is clamped.
    """

    algorithm: str
    step_size: float
    iterations: int | None = None
    epochs: int | None = None
    inner_steps: int | None = None
    samples: int | None = None
    inner_samples: int | None = None
    radius: float | None = None
    outer_radius: float | None = None
    inner_radius: float | None = None
    seed: int = 0
    oracle_mode: OracleMode = field(default_factory=OracleMode.exact)
    divergence_policy: DivergencePolicy = field(default_factory=DivergencePolicy.abort)
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not (self.step_size > 0):
            raise ConfigError("step_size must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        object.__setattr__(self, "oracle_mode", oracle_mode_with_default(self.oracle_mode))
        object.__setattr__(
            self, "divergence_policy", divergence_policy_with_default(self.divergence_policy)
        )
        if self.algorithm in (EXACT_PG, ZO1P_PG, ZO2P_PG):
            self._require_counter("iterations", minimum=0)
            if self.algorithm != EXACT_PG:
                self._require_counter("samples", minimum=1)
                self._require_positive("radius")
        else:
            self._require_counter("epochs", minimum=0)
            self._require_counter("inner_steps", minimum=1)
            self._require_counter("samples", minimum=1)
            self._require_counter("inner_samples", minimum=1)
            self._require_positive("outer_radius")
            self._require_positive("inner_radius")

    def _require_counter(self, name: str, minimum: int) -> None:
        value = getattr(self, name)
        if value is None or int(value) < minimum:
            raise ConfigError(f"{self.algorithm} requires {name} >= {minimum}")
        object.__setattr__(self, name, int(value))

    def _require_positive(self, name: str) -> None:
        value = getattr(self, name)
        if value is None or not (float(value) > 0):
            raise ConfigError(f"{self.algorithm} requires {name} > 0")

    def total_steps(self) -> int:
        if self.algorithm == SVRPG:
            return self.epochs * self.inner_steps
        return self.iterations

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        out: dict = {"algorithm": self.algorithm, "step_size": self.step_size}
        for name in (
            "iterations",
            "epochs",
            "inner_steps",
            "samples",
            "inner_samples",
            "radius",
            "outer_radius",
            "inner_radius",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        out["seed"] = self.seed
        out["oracle_mode"] = self.oracle_mode.spec()
        out["divergence_policy"] = self.divergence_policy.spec()
        out["record_every"] = self.record_every
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {
            "algorithm",
            "step_size",
            "iterations",
            "epochs",
            "inner_steps",
            "samples",
            "inner_samples",
            "radius",
            "outer_radius",
            "inner_radius",
            "seed",
            "oracle_mode",
            "divergence_policy",
            "record_every",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        if "algorithm" not in data or "step_size" not in data:
            raise ConfigError("run config needs at least 'algorithm' and 'step_size'")
        return cls(**data)


@dataclass(frozen=True)
class IterationRecord:
    """One snapshot of an optimizer run; field order matches the CSV schema."""

    global_step: int
    epoch: int | None
    inner_step: int | None
    cost: float
    normalized_gap: float
    grad_norm: float
    spectral_radius: float
    cost_evals_cum: int
    two_point_cum: int


CSV_COLUMNS = (
    "global_step",
    "epoch",
    "inner_step",
    "cost",
    "normalized_gap",
    "grad_norm",
    "spectral_radius",
    "cost_evals_cum",
    "two_point_cum",
)


@dataclass(frozen=True)
class Termination:
    kind: str  # "completed" | "destabilized" | "oracle_failure"
    step: int | None = None

    @classmethod
    def completed(cls) -> "Termination":
        return cls("completed")

    @classmethod
    def destabilized(cls, step: int) -> "Termination":
        return cls("destabilized", step)

    @classmethod
    def oracle_failure(cls, step: int) -> "Termination":
        return cls("oracle_failure", step)

    @property
    def is_completed(self) -> bool:
        return self.kind == "completed"


@dataclass
class SvrpgDebug:
    """Optional capture of the dual-loop internals (for verification only)."""

    anchors: list[np.ndarray] = field(default_factory=list)
    anchor_directions: list[np.ndarray] = field(default_factory=list)
    directions: list[np.ndarray] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)


@dataclass
class Trace:
    """Everything one run produced.

    For a completed run the last record is always emitted, so its cumulative
    counters equal the ledger totals; a terminated run keeps the ledger as
    the authoritative count (records are a sampled view).
    """

    config: RunConfig
    records: list[IterationRecord]
    final_gain: np.ndarray
    ledger: QueryLedger
    termination: Termination
    debug: SvrpgDebug | None = None


class _Recorder:
    """Computes record rows from the exact value matrix, whatever the oracle."""

    def __init__(
        self,
        system: LinearQuadraticSystem,
        baseline_gain: np.ndarray,
        x0: np.ndarray,
        ledger: QueryLedger,
        record_every: int,
    ) -> None:
        self._system = system
        self._x0 = x0
        self._ledger = ledger
        self._every = record_every
        _, best_gain = lqr_core.optimal_gain(system)
        self._best_cx = lqr_core.cost_from_initial_state(system, best_gain, x0)
        base_cx = lqr_core.cost_from_initial_state(system, baseline_gain, x0)
        # a run started at (numerically) the optimum has no meaningful gap
        # denominator; such records report gap 0.0
        self._gap_denom = base_cx - self._best_cx
        self.records: list[IterationRecord] = []

    def due(self, step: int, total: int) -> bool:
        return step % self._every == 0 or step == total

    def emit(
        self,
        step: int,
        gain: np.ndarray,
        grad_norm: float,
        epoch: int | None = None,
        inner_step: int | None = None,
    ) -> None:
        system = self._system
        loop = system.a - system.b @ gain
        rho = dense_linalg.spectral_radius(loop)
        p = dense_linalg.solve_discrete_lyapunov(loop, system.q + gain.T @ system.r @ gain)
        cost = float(np.trace(p @ system.sigma0))
        if self._gap_denom > 1e-14:
            gap = (float(self._x0 @ p @ self._x0) - self._best_cx) / self._gap_denom
        else:
            gap = 0.0
        self.records.append(
            IterationRecord(
                global_step=step,
                epoch=epoch,
                inner_step=inner_step,
                cost=cost,
                normalized_gap=gap,
                grad_norm=grad_norm,
                spectral_radius=rho,
                cost_evals_cum=self._ledger.cost_evaluations,
                two_point_cum=self._ledger.two_point_queries,
            )
        )


def _prepare(
    system: LinearQuadraticSystem,
    initial_gain,
    config: RunConfig,
    expected_algorithm: str,
    x0,
) -> tuple[np.ndarray, np.ndarray, QueryLedger, _Recorder, np.random.Generator]:
    if config.algorithm != expected_algorithm:
        raise ConfigError(
            f"config targets {config.algorithm!r}, expected {expected_algorithm!r}"
        )
    gain = lqr_core.check_gain(system, initial_gain).copy()
    if not lqr_core.is_stabilizing(system, gain):
        raise UnstableGainError("initial gain must stabilize the system")
    x0_vec = (
        np.ones(system.n_x) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(-1)
    )
    ledger = QueryLedger()
    recorder = _Recorder(system, gain, x0_vec, ledger, config.record_every)
    rng = np.random.default_rng(config.seed)
    return gain, x0_vec, ledger, recorder, rng


def _is_stable(system: LinearQuadraticSystem, gain: np.ndarray) -> bool:
    loop = system.a - system.b @ gain
    return dense_linalg.spectral_radius(loop) < 1.0 - STABILITY_MARGIN


def run_exact_pg(
    system: LinearQuadraticSystem, initial_gain, config: RunConfig, x0=None
) -> Trace:
    """Gradient descent with the exact model-based gradient."""
    gain, _, ledger, recorder, _ = _prepare(system, initial_gain, config, EXACT_PG, x0)
    recorder.emit(0, gain, 0.0)
    termination = Termination.completed()
    total = config.iterations
    for step in range(1, total + 1):
        direction = lqr_core.exact_gradient(system, gain)
        candidate = gain - config.step_size * direction
        if not _is_stable(system, candidate):
            termination = Termination.destabilized(step)
            break
        gain = candidate
        if recorder.due(step, total):
            recorder.emit(step, gain, float(np.linalg.norm(direction, "fro")))
    return Trace(config, recorder.records, gain, ledger, termination)


def _run_single_loop(
    system: LinearQuadraticSystem,
    initial_gain,
    config: RunConfig,
    algorithm: str,
    estimate_fn: Callable,
    x0,
) -> Trace:
    gain, _, ledger, recorder, rng = _prepare(system, initial_gain, config, algorithm, x0)
    oracle = CostOracle(system, config.oracle_mode, config.divergence_policy)
    recorder.emit(0, gain, 0.0)
    termination = Termination.completed()
    total = config.iterations
    for step in range(1, total + 1):
        try:
            estimate = estimate_fn(
                oracle, gain, config.radius, config.samples, rng, ledger
            )
        except DestabilizedQueryError:
            termination = Termination.oracle_failure(step)
            break
        candidate = gain - config.step_size * estimate.matrix
        if not _is_stable(system, candidate):
            termination = Termination.destabilized(step)
            break
        gain = candidate
        if recorder.due(step, total):
            recorder.emit(step, gain, estimate.norm)
    return Trace(config, recorder.records, gain, ledger, termination)


def run_pg_zo1p(
    system: LinearQuadraticSystem, initial_gain, config: RunConfig, x0=None
) -> Trace:
    """Policy gradient with one-point estimates (baseline)."""
    return _run_single_loop(
        system, initial_gain, config, ZO1P_PG, zeroth_order.zo1p_estimate, x0
    )


def run_pg_zo2p(
    system: LinearQuadraticSystem, initial_gain, config: RunConfig, x0=None
) -> Trace:
    """Policy gradient with two-point estimates each iteration.

    Ledger for a completed run: ``2 * iterations * samples`` evaluations,
    ``iterations * samples`` two-point queries.
    """
    return _run_single_loop(
        system, initial_gain, config, ZO2P_PG, zeroth_order.zo2p_estimate, x0
    )


def run_svrpg(
    system: LinearQuadraticSystem,
    initial_gain,
    config: RunConfig,
    x0=None,
    capture_debug: bool = False,
) -> Trace:
    """Variance-reduced dual loop mixing two-point anchors with one-point steps.

    Each epoch recomputes a two-point anchor estimate (``samples`` draws at
    ``outer_radius``), then takes ``inner_steps`` updates along
    ``anchor + (onepoint(K) - onepoint(anchor_gain))`` where the two
    one-point estimates share the same ``inner_samples`` draws at
    ``inner_radius``.  At the first step of an epoch the shared-sample terms
    cancel exactly, so the applied direction equals the anchor estimate.

    Ledger for a completed run: ``2*epochs*samples + 2*epochs*inner_steps*
    inner_samples`` evaluations, of which ``epochs*samples`` are two-point.
    """
    gain, _, ledger, recorder, rng = _prepare(system, initial_gain, config, SVRPG, x0)
    oracle = CostOracle(system, config.oracle_mode, config.divergence_policy)
    recorder.emit(0, gain, 0.0)
    termination = Termination.completed()
    debug = SvrpgDebug() if capture_debug else None
    total = config.epochs * config.inner_steps
    done = False
    for epoch in range(config.epochs):
        anchor_gain = gain.copy()
        step_base = epoch * config.inner_steps
        try:
            anchor = zeroth_order.zo2p_estimate(
                oracle, anchor_gain, config.outer_radius, config.samples, rng, ledger
            )
        except DestabilizedQueryError:
            termination = Termination.oracle_failure(step_base + 1)
            break
        if debug is not None:
            debug.anchors.append(anchor_gain.copy())
            debug.anchor_directions.append(anchor.matrix.copy())
        for inner in range(config.inner_steps):
            step = step_base + inner + 1
            try:
                at_current, at_anchor = zeroth_order.zo1p_pair_estimate(
                    oracle, gain, anchor_gain, config.inner_radius,
                    config.inner_samples, rng, ledger,
                )
            except DestabilizedQueryError:
                termination = Termination.oracle_failure(step)
                done = True
                break
            direction = anchor.matrix + (at_current.matrix - at_anchor.matrix)
            if debug is not None:
                debug.directions.append(direction.copy())
            candidate = gain - config.step_size * direction
            if not _is_stable(system, candidate):
                termination = Termination.destabilized(step)
                done = True
                break
            gain = candidate
            if debug is not None:
                debug.iterates.append(gain.copy())
            if recorder.due(step, total):
                recorder.emit(
                    step, gain, float(np.linalg.norm(direction, "fro")), epoch, inner
                )
        if done:
            break
    return Trace(config, recorder.records, gain, ledger, termination, debug)


_RUNNERS = {
    EXACT_PG: run_exact_pg,
    ZO1P_PG: run_pg_zo1p,
    ZO2P_PG: run_pg_zo2p,
    SVRPG: run_svrpg,
}


def run(system: LinearQuadraticSystem, initial_gain, config: RunConfig, x0=None) -> Trace:
    """Dispatch to the loop named by ``config.algorithm``."""
    return _RUNNERS[config.algorithm](system, initial_gain, config, x0=x0)
