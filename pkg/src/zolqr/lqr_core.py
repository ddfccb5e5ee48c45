"""LQR problem instances, exact cost/gradient evaluation, and the reported gap.

Two cost notions coexist deliberately: the expected cost
``trace(P_K Sigma0)`` drives oracles and optimization, while the fixed-x0
quadratic form ``x0^T P_K x0`` feeds the normalized optimality gap used for
reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from zolqr import dense_linalg
from zolqr.errors import (
    DegenerateBaselineError,
    DimensionMismatchError,
    InvalidSystemError,
    UnstableGainError,
)

# A gain is accepted as stabilizing only when rho(A - BK) < 1 - margin;
# marginal gains would make the downstream Lyapunov solves ill-conditioned.
STABILITY_MARGIN = 1e-12


def _check_spd(matrix: np.ndarray, name: str) -> np.ndarray:
    sym_defect = np.linalg.norm(matrix - matrix.T, "fro")
    if sym_defect > 1e-10 * (1.0 + np.linalg.norm(matrix, "fro")):
        raise InvalidSystemError(f"{name} not symmetric")
    try:
        np.linalg.cholesky(0.5 * (matrix + matrix.T))
    except np.linalg.LinAlgError:
        raise InvalidSystemError(f"{name} not positive definite") from None
    return matrix


def _check_psd(matrix: np.ndarray, name: str) -> np.ndarray:
    sym_defect = np.linalg.norm(matrix - matrix.T, "fro")
    if sym_defect > 1e-10 * (1.0 + np.linalg.norm(matrix, "fro")):
        raise InvalidSystemError(f"{name} not symmetric")
    floor = -1e-10 * (1.0 + np.linalg.norm(matrix, "fro"))
    if np.linalg.eigvalsh(0.5 * (matrix + matrix.T)).min() < floor:
        raise InvalidSystemError(f"{name} not positive semidefinite")
    return matrix


@dataclass(frozen=True)
class LinearQuadraticSystem:
    """Discrete-time LTI plant with quadratic stage cost.

    Dynamics ``x_{t+1} = A x_t + B u_t`` under state feedback ``u = -K x``;
    stage cost ``x^T Q x + u^T R u``; ``sigma0`` is the second moment of the
    random initial state.
    """

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray
    sigma0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        a = dense_linalg.as_matrix(self.a, "A")
        if a.shape[0] != a.shape[1]:
            raise InvalidSystemError(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        b = dense_linalg.as_matrix(self.b, "B")
        if b.shape[0] != n:
            raise InvalidSystemError(f"B has {b.shape[0]} rows, expected {n}")
        q = _check_spd(dense_linalg.as_matrix(self.q, "Q"), "Q")
        if q.shape != (n, n):
            raise InvalidSystemError(f"Q has shape {q.shape}, expected ({n}, {n})")
        r = _check_spd(dense_linalg.as_matrix(self.r, "R"), "R")
        if r.shape != (b.shape[1], b.shape[1]):
            raise InvalidSystemError(
                f"R has shape {r.shape}, expected ({b.shape[1]}, {b.shape[1]})"
            )
        sigma0 = np.eye(n) if self.sigma0 is None else dense_linalg.as_matrix(self.sigma0, "Sigma0")
        if sigma0.shape != (n, n):
            raise InvalidSystemError(f"Sigma0 has shape {sigma0.shape}, expected ({n}, {n})")
        _check_psd(sigma0, "Sigma0")
        for name, arr in (("a", a), ("b", b), ("q", q), ("r", r), ("sigma0", sigma0)):
            object.__setattr__(self, name, arr)

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.b.shape[1]

    def to_dict(self) -> dict:
        return {
            "A": self.a.tolist(),
            "B": self.b.tolist(),
            "Q": self.q.tolist(),
            "R": self.r.tolist(),
            "Sigma0": self.sigma0.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearQuadraticSystem":
        missing = [key for key in ("A", "B", "Q", "R") if key not in data]
        if missing:
            raise InvalidSystemError(f"system definition missing keys: {missing}")
        return cls(
            a=np.asarray(data["A"], dtype=np.float64),
            b=np.asarray(data["B"], dtype=np.float64),
            q=np.asarray(data["Q"], dtype=np.float64),
            r=np.asarray(data["R"], dtype=np.float64),
            sigma0=(
                np.asarray(data["Sigma0"], dtype=np.float64) if "Sigma0" in data else None
            ),
        )


def check_gain(system: LinearQuadraticSystem, gain) -> np.ndarray:
    """Validate a feedback gain's shape against the system."""
    arr = dense_linalg.as_matrix(gain, "K")
    if arr.shape != (system.n_u, system.n_x):
        raise DimensionMismatchError(
            f"K has shape {arr.shape}, expected ({system.n_u}, {system.n_x})"
        )
    return arr


def closed_loop(system: LinearQuadraticSystem, gain) -> np.ndarray:
    """Closed-loop dynamics matrix ``A - B K``."""
    return system.a - system.b @ check_gain(system, gain)


def is_stabilizing(system: LinearQuadraticSystem, gain) -> bool:
    """True iff ``rho(A - BK) < 1 - STABILITY_MARGIN``."""
    return dense_linalg.spectral_radius(closed_loop(system, gain)) < 1.0 - STABILITY_MARGIN


def value_matrix(system: LinearQuadraticSystem, gain) -> np.ndarray:
    """Quadratic value matrix P_K solving ``P = Q + K^T R K + (A-BK)^T P (A-BK)``."""
    k = check_gain(system, gain)
    loop = system.a - system.b @ k
    if dense_linalg.spectral_radius(loop) >= 1.0 - STABILITY_MARGIN:
        raise UnstableGainError("gain does not stabilize the system")
    return dense_linalg.solve_discrete_lyapunov(loop, system.q + k.T @ system.r @ k)


def cost(system: LinearQuadraticSystem, gain) -> float:
    """Expected infinite-horizon cost ``trace(P_K Sigma0)``."""
    return float(np.trace(value_matrix(system, gain) @ system.sigma0))


def cost_from_initial_state(system: LinearQuadraticSystem, gain, x0) -> float:
    """Infinite-horizon cost ``x0^T P_K x0`` from a deterministic start."""
    x = np.asarray(x0, dtype=np.float64).reshape(-1)
    if x.shape[0] != system.n_x:
        raise DimensionMismatchError(f"x0 has length {x.shape[0]}, expected {system.n_x}")
    return float(x @ value_matrix(system, gain) @ x)


def state_covariance(system: LinearQuadraticSystem, gain) -> np.ndarray:
    """Aggregate state second moment solving ``S = Sigma0 + (A-BK) S (A-BK)^T``."""
    loop = closed_loop(system, gain)
    if dense_linalg.spectral_radius(loop) >= 1.0 - STABILITY_MARGIN:
        raise UnstableGainError("gain does not stabilize the system")
    return dense_linalg.solve_discrete_lyapunov(loop.T, system.sigma0)


def exact_gradient(system: LinearQuadraticSystem, gain) -> np.ndarray:
    """Policy gradient ``2((R + B^T P_K B) K - B^T P_K A) S_K`` of the cost."""
    k = check_gain(system, gain)
    p = value_matrix(system, k)
    s = state_covariance(system, k)
    return 2.0 * ((system.r + system.b.T @ p @ system.b) @ k - system.b.T @ p @ system.a) @ s


def optimal_gain(system: LinearQuadraticSystem) -> tuple[np.ndarray, np.ndarray]:
    """Riccati value matrix and optimal gain for the system."""
    return dense_linalg.solve_dare(system.a, system.b, system.q, system.r)


def normalized_gap(system: LinearQuadraticSystem, gain, baseline_gain, best_gain, x0) -> float:
    """Suboptimality of ``gain`` relative to the baseline, in [0, 1] at the endpoints.

    Computed from fixed-x0 costs:
    ``(c(K) - c(K_best)) / (c(K_baseline) - c(K_best))``.
    """
    current = cost_from_initial_state(system, gain, x0)
    base = cost_from_initial_state(system, baseline_gain, x0)
    best = cost_from_initial_state(system, best_gain, x0)
    denom = base - best
    if denom <= 1e-14:
        raise DegenerateBaselineError("baseline gain is already (numerically) optimal")
    return (current - best) / denom
