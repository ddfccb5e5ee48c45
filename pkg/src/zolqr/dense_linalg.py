"""Dense real-matrix kernels: spectral radius, discrete Lyapunov and Riccati.

Thin validating layer over the selected kernel backend.  All outputs of the
Lyapunov/Riccati solvers are symmetrized to suppress round-off drift, and
residuals are verified against explicit tolerances before returning.
"""

from __future__ import annotations

import numpy as np

from zolqr import backend
from zolqr.errors import (
    DimensionMismatchError,
    NonSquareError,
    NotStabilizableError,
    NumericalFailureError,
    UnstableArgumentError,
)

# Kronecker lifting is exact and cheap up to this state dimension; larger
# problems fall back to fixed-point iteration.
KRON_DIM_LIMIT = 20

LYAPUNOV_RESIDUAL_TOL = 1e-10
DARE_RESIDUAL_TOL = 1e-10
DARE_STEP_TOL = 1e-12
DARE_MAX_ITER = 10**6

_FIXED_POINT_STEP_TOL = 1e-13
_FIXED_POINT_MAX_ITER = 500_000


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Convert to a finite float64 2-D array, raising on bad input."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _require_square(arr: np.ndarray, name: str) -> np.ndarray:
    if arr.shape[0] != arr.shape[1]:
        raise NonSquareError(f"{name} must be square, got shape {arr.shape}")
    return arr


def _require_symmetric(arr: np.ndarray, name: str) -> np.ndarray:
    scale = np.linalg.norm(arr, "fro")
    if np.linalg.norm(arr - arr.T, "fro") > 1e-10 * (1.0 + scale):
        raise ValueError(f"{name} must be symmetric")
    return arr


def spectral_radius(matrix) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Deterministic for fixed input; accurate to ~1e-9 relative.
    """
    arr = _require_square(as_matrix(matrix, "matrix"), "matrix")
    return float(backend.spectral_radius(arr))


def _lyapunov_fixed_point(coeff: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    solution = rhs.copy()
    for _ in range(_FIXED_POINT_MAX_ITER):
        updated = rhs + coeff.T @ solution @ coeff
        updated = 0.5 * (updated + updated.T)
        if np.linalg.norm(updated - solution, "fro") <= _FIXED_POINT_STEP_TOL * (
            1.0 + np.linalg.norm(updated, "fro")
        ):
            return updated
        solution = updated
    raise NumericalFailureError("Lyapunov fixed-point iteration did not converge")


def solve_discrete_lyapunov(coeff, rhs) -> np.ndarray:
    """Solve ``P = rhs + coeff^T P coeff`` for a stable coefficient matrix.

    Uses the exact Kronecker-lifted linear solve for dimensions up to
    ``KRON_DIM_LIMIT`` and fixed-point iteration above that.  The symmetric
    output satisfies ``||P - rhs - coeff^T P coeff||_F <= 1e-10 (1 + ||P||_F)``.

    Raises
    ------
    UnstableArgumentError
        If ``spectral_radius(coeff) >= 1``.
    NumericalFailureError
        If the solve breaks down or the residual check fails.
    """
    coeff_m = _require_square(as_matrix(coeff, "coeff"), "coeff")
    rhs_m = _require_symmetric(_require_square(as_matrix(rhs, "rhs"), "rhs"), "rhs")
    if coeff_m.shape != rhs_m.shape:
        raise DimensionMismatchError(
            f"coeff {coeff_m.shape} and rhs {rhs_m.shape} must have equal shapes"
        )
    if spectral_radius(coeff_m) >= 1.0:
        raise UnstableArgumentError("coefficient matrix has spectral radius >= 1")

    if coeff_m.shape[0] <= KRON_DIM_LIMIT:
        solution = backend.solve_discrete_lyapunov(coeff_m, rhs_m)
    else:
        solution = _lyapunov_fixed_point(coeff_m, rhs_m)

    residual = np.linalg.norm(solution - rhs_m - coeff_m.T @ solution @ coeff_m, "fro")
    if residual > LYAPUNOV_RESIDUAL_TOL * (1.0 + np.linalg.norm(solution, "fro")):
        raise NumericalFailureError(f"Lyapunov residual {residual:.3e} above tolerance")
    return solution


def dare_residual(a, b, q, r, p) -> float:
    """Frobenius norm of the Riccati fixed-point defect at ``p``."""
    gain_term = a.T @ p @ b @ np.linalg.solve(r + b.T @ p @ b, b.T @ p @ a)
    return float(np.linalg.norm(p - (q + a.T @ p @ a - gain_term), "fro"))


def solve_dare(a, b, q, r) -> tuple[np.ndarray, np.ndarray]:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Value iteration ``P <- Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A``
    from ``P = Q``, stopped when the step falls below ``1e-12 (1 + ||P||_F)``.

    Returns
    -------
    (p, gain)
        ``p`` solves the Riccati fixed point to residual
        ``<= 1e-10 (1 + ||p||_F)`` and ``gain = (R + B^T P B)^{-1} B^T P A``
        renders ``A - B gain`` stable (policy convention ``u = -K x``).

    Raises
    ------
    NotStabilizableError
        If the iteration fails to converge, the residual check fails, or the
        resulting closed loop is not stable.
    """
    a_m = _require_square(as_matrix(a, "A"), "A")
    b_m = as_matrix(b, "B")
    q_m = _require_symmetric(_require_square(as_matrix(q, "Q"), "Q"), "Q")
    r_m = _require_symmetric(_require_square(as_matrix(r, "R"), "R"), "R")
    n = a_m.shape[0]
    if b_m.shape[0] != n:
        raise DimensionMismatchError(f"B has {b_m.shape[0]} rows, expected {n}")
    if q_m.shape[0] != n:
        raise DimensionMismatchError(f"Q has shape {q_m.shape}, expected ({n}, {n})")
    if r_m.shape[0] != b_m.shape[1]:
        raise DimensionMismatchError(
            f"R has shape {r_m.shape}, expected ({b_m.shape[1]}, {b_m.shape[1]})"
        )

    p = q_m.copy()
    converged = False
    for _ in range(DARE_MAX_ITER):
        btpb = r_m + b_m.T @ p @ b_m
        btpa = b_m.T @ p @ a_m
        try:
            updated = q_m + a_m.T @ p @ a_m - a_m.T @ p @ b_m @ np.linalg.solve(btpb, btpa)
        except np.linalg.LinAlgError as exc:
            raise NotStabilizableError(f"Riccati iteration broke down: {exc}") from exc
        updated = 0.5 * (updated + updated.T)
        if not np.all(np.isfinite(updated)):
            raise NotStabilizableError("Riccati iteration diverged to non-finite values")
        if np.linalg.norm(updated - p, "fro") <= DARE_STEP_TOL * (
            1.0 + np.linalg.norm(updated, "fro")
        ):
            p = updated
            converged = True
            break
        p = updated
    if not converged:
        raise NotStabilizableError("Riccati iteration did not converge within the cap")

    # Newton polish (policy iteration): each step solves the exact value
    # equation for the current gain, removing the value iteration's O(rho^2k)
    # fixed-point tail so the returned gain is stationary to near machine
    # precision.
    for _ in range(8):
        gain = np.linalg.solve(r_m + b_m.T @ p @ b_m, b_m.T @ p @ a_m)
        loop = a_m - b_m @ gain
        if spectral_radius(loop) >= 1.0:
            break
        try:
            refined = solve_discrete_lyapunov(loop, q_m + gain.T @ r_m @ gain)
        except (NumericalFailureError, UnstableArgumentError):
            break
        step = np.linalg.norm(refined - p, "fro")
        p = refined
        if step <= 1e-14 * (1.0 + np.linalg.norm(p, "fro")):
            break

    gain = np.linalg.solve(r_m + b_m.T @ p @ b_m, b_m.T @ p @ a_m)
    residual = dare_residual(a_m, b_m, q_m, r_m, p)
    if residual > DARE_RESIDUAL_TOL * (1.0 + np.linalg.norm(p, "fro")):
        raise NotStabilizableError(f"Riccati residual {residual:.3e} above tolerance")
    if spectral_radius(a_m - b_m @ gain) >= 1.0:
        raise NotStabilizableError("closed loop under the Riccati gain is not stable")
    return p, gain
