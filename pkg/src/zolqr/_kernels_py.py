"""Pure-numpy implementations of the hot kernels.

Selected at import time by :mod:`zolqr.backend` when the compiled extension
is unavailable (or explicitly requested via ``ZOLQR_BACKEND=pure``).  The
three entry points mirror :mod:`zolqr._kernels` exactly:

* ``spectral_radius`` -- largest eigenvalue magnitude of a square matrix,
* ``solve_discrete_lyapunov`` -- Kronecker-lifted direct solve of
  ``P = W + M^T P M`` (caller guarantees ``rho(M) < 1``),
* ``closed_loop_cost_batch`` -- fused quadratic-cost evaluation for a batch
  of feedback gains (NaN cost marks a destabilizing gain).
"""

from __future__ import annotations

import numpy as np

from zolqr.errors import NumericalFailureError

BACKEND_NAME = "pure"


def spectral_radius(matrix: np.ndarray) -> float:
    """Return max |eigenvalue| of a square matrix."""
    try:
        eigenvalues = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.abs(eigenvalues).max())


def solve_discrete_lyapunov(coeff: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``P = rhs + coeff^T P coeff`` by vectorizing to a linear system.

    Row-major vec identity: vec(M^T P M) = (M^T kron M^T) vec(P), so P solves
    ``(I - M^T kron M^T) vec(P) = vec(rhs)``.  Output is symmetrized.
    """
    n = coeff.shape[0]
    lhs = np.eye(n * n) - np.kron(coeff.T, coeff.T)
    try:
        vec_p = np.linalg.solve(lhs, rhs.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"Lyapunov solve broke down: {exc}") from exc
    solution = vec_p.reshape(n, n)
    return 0.5 * (solution + solution.T)


def closed_loop_cost_batch(
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    sigma0: np.ndarray,
    gains: np.ndarray,
    margin: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``trace(P_K Sigma0)`` for each gain in a batch.

    Parameters
    ----------
    gains : ndarray, shape (m, n_u, n_x)
        Batch of feedback gains K (policy ``u = -K x``).
    margin : float
        Stability margin; a gain with ``rho(A - BK) >= 1 - margin`` gets a
        NaN cost.

    Returns
    -------
    (costs, rhos) : pair of ndarrays, shape (m,)
        Quadratic costs (NaN where destabilizing) and closed-loop spectral
        radii.
    """
    n = a.shape[0]
    m = gains.shape[0]
    closed = a[None, :, :] - np.einsum("iu,suj->sij", b, gains)
    try:
        rhos = np.abs(np.linalg.eigvals(closed)).max(axis=1)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigenvalue iteration failed: {exc}") from exc

    costs = np.full(m, np.nan)
    stable = rhos < 1.0 - margin
    if stable.any():
        ks = gains[stable]
        weight = q[None, :, :] + np.einsum("sui,uv,svj->sij", ks, r, ks)
        mt = closed[stable].transpose(0, 2, 1)
        lhs = np.eye(n * n)[None, :, :] - np.einsum("sab,scd->sacbd", mt, mt).reshape(
            -1, n * n, n * n
        )
        try:
            vec_p = np.linalg.solve(lhs, weight.reshape(-1, n * n, 1))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"Lyapunov solve broke down: {exc}") from exc
        p = vec_p.reshape(-1, n, n)
        p = 0.5 * (p + p.transpose(0, 2, 1))
        costs[stable] = np.einsum("sij,ji->s", p, sigma0)
    return costs, rhos
