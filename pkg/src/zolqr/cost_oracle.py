"""Black-box cost queries with selectable fidelity and exact accounting.

The oracle charges every query attempt to a :class:`QueryLedger`; estimators
reclassify paired evaluations as two-point queries afterwards, so the
identity ``cost_evaluations == one_point_queries + 2 * two_point_queries``
holds after every public operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from zolqr import backend, lqr_core
from zolqr.errors import (
    ConfigError,
    DestabilizedQueryError,
    PerturbationRejectedError,
)
from zolqr.lqr_core import STABILITY_MARGIN, LinearQuadraticSystem


@dataclass(frozen=True)
class OracleMode:
    """Fidelity of the cost oracle.

    ``exact`` returns ``trace(P_K Sigma0)`` deterministically;
    ``sampled_initial_state`` returns ``x0^T P_K x0`` for a random standard
    normal start (requires ``Sigma0 = I``); ``finite_horizon`` accumulates
    the stage cost of a simulated trajectory, which lower-bounds the exact
    cost for the same start.
    """

    kind: str = "exact"
    horizon: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "sampled_initial_state", "finite_horizon"):
            raise ConfigError(f"unknown oracle mode {self.kind!r}")
        if self.kind == "finite_horizon":
            if self.horizon is None or int(self.horizon) < 1:
                raise ConfigError("finite_horizon mode needs a horizon >= 1")
            object.__setattr__(self, "horizon", int(self.horizon))
        elif self.horizon is not None:
            raise ConfigError(f"mode {self.kind!r} does not take a horizon")

    @classmethod
    def exact(cls) -> "OracleMode":
        return cls("exact")

    @classmethod
    def sampled_initial_state(cls) -> "OracleMode":
        return cls("sampled_initial_state")

    @classmethod
    def finite_horizon(cls, horizon: int) -> "OracleMode":
        return cls("finite_horizon", horizon)

    @classmethod
    def parse(cls, text: str) -> "OracleMode":
        if text == "exact":
            return cls.exact()
        if text == "sampled_initial_state":
            return cls.sampled_initial_state()
        if text.startswith("finite_horizon:"):
            return cls.finite_horizon(int(text.split(":", 1)[1]))
        raise ConfigError(f"cannot parse oracle mode {text!r}")

    def spec(self) -> str:
        if self.kind == "finite_horizon":
            return f"finite_horizon:{self.horizon}"
        return self.kind


@dataclass(frozen=True)
class DivergencePolicy:
    """What to do when a queried gain leaves the stabilizing set.

    ``abort`` raises; ``resample`` signals the caller to redraw the
    offending perturbation (up to ``max_retries`` redraws per sample, failed
    attempts still charged); ``penalty`` returns a fixed value, which should
    upper-bound the initial cost of the system it is used with.
    """

    kind: str = "abort"
    max_retries: int = 10
    penalty_value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("abort", "resample", "penalty"):
            raise ConfigError(f"unknown divergence policy {self.kind!r}")
        if self.kind == "resample" and int(self.max_retries) < 1:
            raise ConfigError("resample policy needs max_retries >= 1")
        if self.kind == "penalty":
            if self.penalty_value is None or not np.isfinite(self.penalty_value):
                raise ConfigError("penalty policy needs a finite penalty value")
            if self.penalty_value <= 0:
                raise ConfigError("penalty value must be positive")

    @classmethod
    def abort(cls) -> "DivergencePolicy":
        return cls("abort")

    @classmethod
    def resample(cls, max_retries: int = 10) -> "DivergencePolicy":
        return cls("resample", max_retries=max_retries)

    @classmethod
    def penalty(cls, value: float) -> "DivergencePolicy":
        return cls("penalty", penalty_value=float(value))

    @classmethod
    def parse(cls, text: str) -> "DivergencePolicy":
        if text == "abort":
            return cls.abort()
        if text == "resample":
            return cls.resample()
        if text.startswith("resample:"):
            return cls.resample(int(text.split(":", 1)[1]))
        if text.startswith("penalty:"):
            return cls.penalty(float(text.split(":", 1)[1]))
        raise ConfigError(f"cannot parse divergence policy {text!r}")

    def spec(self) -> str:
        if self.kind == "resample":
            return f"resample:{self.max_retries}"
        if self.kind == "penalty":
            return f"penalty:{self.penalty_value!r}"
        return self.kind


@dataclass
class QueryLedger:
    """Counters for cost evaluations and their one-/two-point classification.

    Invariant (checked after every mutation):
    ``cost_evaluations == one_point_queries + 2 * two_point_queries``.
    Counters only accumulate across public estimator operations; the pairing
    conversion moves already-charged evaluations between classes.
    """

    cost_evaluations: int = 0
    one_point_queries: int = 0
    two_point_queries: int = 0

    def _check(self) -> None:
        if self.cost_evaluations != self.one_point_queries + 2 * self.two_point_queries:
            raise AssertionError(
                f"ledger identity violated: {self.cost_evaluations} != "
                f"{self.one_point_queries} + 2*{self.two_point_queries}"
            )
        if min(self.cost_evaluations, self.one_point_queries, self.two_point_queries) < 0:
            raise AssertionError("ledger counters must be nonnegative")

    def charge_evaluations(self, count: int) -> None:
        """Charge ``count`` cost evaluations, initially classed as one-point."""
        self.cost_evaluations += count
        self.one_point_queries += count
        self._check()

    def convert_pairs(self, pairs: int) -> None:
        """Reclassify ``2 * pairs`` one-point charges as ``pairs`` two-point queries."""
        self.one_point_queries -= 2 * pairs
        self.two_point_queries += pairs
        self._check()

    def merge(self, other: "QueryLedger") -> None:
        """Fold a sub-ledger in (deterministic join for concurrent estimation)."""
        self.cost_evaluations += other.cost_evaluations
        self.one_point_queries += other.one_point_queries
        self.two_point_queries += other.two_point_queries
        self._check()

    def copy(self) -> "QueryLedger":
        return QueryLedger(
            self.cost_evaluations, self.one_point_queries, self.two_point_queries
        )

    def delta_since(self, earlier: "QueryLedger") -> "QueryLedger":
        return QueryLedger(
            self.cost_evaluations - earlier.cost_evaluations,
            self.one_point_queries - earlier.one_point_queries,
            self.two_point_queries - earlier.two_point_queries,
        )


class CostOracle:
    """Cost queries against an LQR instance, charged to a ledger.

    Evaluation is pure given the gain, the mode, and the drawn randomness;
    every attempt (including ones rejected for instability) is charged.
    """

    def __init__(
        self,
        system: LinearQuadraticSystem,
        mode: OracleMode | None = None,
        policy: DivergencePolicy | None = None,
    ) -> None:
        self.system = system
        self.mode = mode if mode is not None else OracleMode.exact()
        self.policy = policy if policy is not None else DivergencePolicy.abort()
        if self.mode.kind == "sampled_initial_state" and not np.array_equal(
            system.sigma0, np.eye(system.n_x)
        ):
            raise ConfigError(
                "sampled_initial_state mode requires Sigma0 = I; "
                "whitening is not applied implicitly"
            )
        self._sigma0_factor: np.ndarray | None = None
        self._sigma0_is_identity = bool(
            np.array_equal(system.sigma0, np.eye(system.n_x))
        )

    def _initial_state_factor(self) -> np.ndarray:
        if self._sigma0_factor is None:
            eigvals, eigvecs = np.linalg.eigh(self.system.sigma0)
            self._sigma0_factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        return self._sigma0_factor

    def query(self, gain, rng: np.random.Generator | None, ledger: QueryLedger) -> float:
        """Evaluate one cost query; increments the ledger by one evaluation."""
        values, retry = self.query_batch(
            lqr_core.check_gain(self.system, gain)[None, :, :], rng, ledger
        )
        if retry:
            raise PerturbationRejectedError("queried gain does not stabilize the system")
        return float(values[0])

    def query_batch(
        self,
        gains: np.ndarray,
        rng: np.random.Generator | None,
        ledger: QueryLedger,
    ) -> tuple[np.ndarray, list[int]]:
        """Evaluate a batch of gains; returns values and retryable indices.

        Every entry is charged as one evaluation.  Destabilized entries are
        resolved per the divergence policy: ``abort`` raises, ``penalty``
        substitutes the configured value, ``resample`` leaves NaN and reports
        the index so the caller can redraw.
        """
        sys_ = self.system
        count = gains.shape[0]
        ledger.charge_evaluations(count)
        if self.mode.kind == "exact":
            values, rhos = backend.closed_loop_cost_batch(
                sys_.a, sys_.b, sys_.q, sys_.r, sys_.sigma0, gains, STABILITY_MARGIN
            )
        else:
            if rng is None:
                raise ConfigError(f"oracle mode {self.mode.kind!r} needs an rng stream")
            values = np.empty(count)
            rhos = np.empty(count)
            for i in range(count):
                values[i], rhos[i] = self._stochastic_value(gains[i], rng)
        bad = np.flatnonzero(~(rhos < 1.0 - STABILITY_MARGIN))
        if bad.size == 0:
            return values, []
        if self.policy.kind == "abort":
            raise DestabilizedQueryError(
                f"query at index {bad[0]} destabilizes the system (rho={rhos[bad[0]]:.6f})"
            )
        if self.policy.kind == "penalty":
            values[bad] = self.policy.penalty_value
            return values, []
        values[bad] = np.nan
        return values, [int(i) for i in bad]

    def _stochastic_value(self, gain: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
        sys_ = self.system
        loop = sys_.a - sys_.b @ gain
        rho = float(backend.spectral_radius(loop))
        if self.mode.kind == "sampled_initial_state":
            x0 = rng.standard_normal(sys_.n_x)
            if rho >= 1.0 - STABILITY_MARGIN:
                return np.nan, rho
            p = backend.solve_discrete_lyapunov(loop, sys_.q + gain.T @ sys_.r @ gain)
            return float(x0 @ p @ x0), rho
        # finite horizon: stage costs of a simulated trajectory
        draw = rng.standard_normal(sys_.n_x)
        x0 = draw if self._sigma0_is_identity else self._initial_state_factor() @ draw
        if rho >= 1.0 - STABILITY_MARGIN:
            return np.nan, rho
        stage = sys_.q + gain.T @ sys_.r @ gain
        total = 0.0
        state = x0
        for _ in range(self.mode.horizon):
            total += float(state @ stage @ state)
            state = loop @ state
        return total, rho


class FunctionOracle:
    """Synthetic black-box oracle around a plain cost function.

    Used by estimator tests and statistical probes; every queried gain is
    treated as stabilizing.
    """

    def __init__(self, fn) -> None:
        self._fn = fn

    def query(self, gain, rng, ledger: QueryLedger) -> float:
        ledger.charge_evaluations(1)
        return float(self._fn(np.asarray(gain, dtype=np.float64)))

    def query_batch(self, gains, rng, ledger: QueryLedger) -> tuple[np.ndarray, list[int]]:
        ledger.charge_evaluations(gains.shape[0])
        return np.array([self._fn(g) for g in gains], dtype=np.float64), []


def oracle_mode_with_default(mode: OracleMode | str | None) -> OracleMode:
    if mode is None:
        return OracleMode.exact()
    if isinstance(mode, str):
        return OracleMode.parse(mode)
    return mode


def divergence_policy_with_default(policy: DivergencePolicy | str | None) -> DivergencePolicy:
    if policy is None:
        return DivergencePolicy.abort()
    if isinstance(policy, str):
        return DivergencePolicy.parse(policy)
    return policy


__all__ = [
    "CostOracle",
    "DivergencePolicy",
    "FunctionOracle",
    "OracleMode",
    "QueryLedger",
    "divergence_policy_with_default",
    "oracle_mode_with_default",
]
