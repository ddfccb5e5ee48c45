# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot loop.

Mirrors :mod:`zolqr._kernels_py`: spectral radius via Hessenberg reduction
followed by Francis double-shift QR (trailing 2x2 blocks resolved
analytically), a Kronecker-lifted discrete Lyapunov solve, and a fused
closed-loop cost evaluation over batches of feedback gains.
"""

from libc.math cimport fabs, sqrt, NAN
from libc.float cimport DBL_EPSILON

import numpy as np

from zolqr.errors import NumericalFailureError

BACKEND_NAME = "compiled"

cdef int MAX_QR_ITER = 30


cdef inline double _sign(double magnitude, double carrier) noexcept:
    return fabs(magnitude) if carrier >= 0.0 else -fabs(magnitude)


cdef void _hessenberg(double* h, double* v, int n) noexcept:
    """In-place Householder reduction of a row-major n x n matrix."""
    cdef int k, i, j
    cdef double sigma, x0, alpha, vnorm2, s, beta
    for k in range(n - 2):
        sigma = 0.0
        for i in range(k + 1, n):
            sigma += h[i * n + k] * h[i * n + k]
        sigma = sqrt(sigma)
        if sigma == 0.0:
            continue
        x0 = h[(k + 1) * n + k]
        alpha = -sigma if x0 >= 0.0 else sigma
        v[k + 1] = x0 - alpha
        vnorm2 = v[k + 1] * v[k + 1]
        for i in range(k + 2, n):
            v[i] = h[i * n + k]
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # rows k+1..n-1: h <- (I - beta v v^T) h
        for j in range(n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * h[i * n + j]
            s *= beta
            for i in range(k + 1, n):
                h[i * n + j] -= v[i] * s
        # columns k+1..n-1: h <- h (I - beta v v^T)
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += h[i * n + j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                h[i * n + j] -= s * v[j]
        # the reflection annihilates column k below the subdiagonal exactly
        h[(k + 1) * n + k] = alpha
        for i in range(k + 2, n):
            h[i * n + k] = 0.0


cdef int _hqr_rho(double* h, int n, double* rho_out) noexcept:
    """Spectral radius of an upper Hessenberg matrix (destroys h).

    Francis double-shift QR with deflation; 1x1 and 2x2 trailing blocks are
    resolved analytically.  Returns 0 on success, -1 if a block fails to
    deflate within MAX_QR_ITER sweeps.
    """
    cdef int nn, l, m, k, i, j, its, mmin
    cdef double anorm, t, x, y, z, w, p, q, r, s, u, v
    cdef double rho = 0.0, mag

    if n <= 0:
        return -1

    anorm = 0.0
    for i in range(n):
        j = i - 1 if i >= 1 else 0
        while j < n:
            anorm += fabs(h[i * n + j])
            j += 1

    t = 0.0
    nn = n - 1
    p = 0.0
    q = 0.0
    r = 0.0
    while nn >= 0:
        its = 0
        while True:
            # find a negligible subdiagonal entry
            l = 0
            for i in range(nn, 0, -1):
                s = fabs(h[(i - 1) * n + (i - 1)]) + fabs(h[i * n + i])
                if s == 0.0:
                    s = anorm
                if fabs(h[i * n + (i - 1)]) <= DBL_EPSILON * s:
                    h[i * n + (i - 1)] = 0.0
                    l = i
                    break
            x = h[nn * n + nn]
            if l == nn:
                # isolated real eigenvalue
                mag = fabs(x + t)
                if mag > rho:
                    rho = mag
                nn -= 1
                break
            y = h[(nn - 1) * n + (nn - 1)]
            w = h[nn * n + (nn - 1)] * h[(nn - 1) * n + nn]
            if l == nn - 1:
                # trailing 2x2 block, resolved analytically
                p = 0.5 * (y - x)
                q = p * p + w
                z = sqrt(fabs(q))
                x += t
                if q >= 0.0:
                    z = p + _sign(z, p)
                    mag = fabs(x + z)
                    if mag > rho:
                        rho = mag
                    if z != 0.0:
                        mag = fabs(x - w / z)
                        if mag > rho:
                            rho = mag
                else:
                    mag = sqrt((x + p) * (x + p) + z * z)
                    if mag > rho:
                        rho = mag
                nn -= 2
                break
            if its == MAX_QR_ITER:
                return -1
            if its == 10 or its == 20:
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    h[i * n + i] -= x
                s = fabs(h[nn * n + (nn - 1)]) + fabs(h[(nn - 1) * n + (nn - 2)])
                y = 0.75 * s
                x = y
                w = -0.4375 * s * s
            its += 1
            # form the implicit double shift and locate the sweep start
            m = nn - 2
            while m >= l:
                z = h[m * n + m]
                r = x - z
                s = y - z
                p = (r * s - w) / h[(m + 1) * n + m] + h[m * n + (m + 1)]
                q = h[(m + 1) * n + (m + 1)] - z - r - s
                r = h[(m + 2) * n + (m + 1)]
                s = fabs(p) + fabs(q) + fabs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = fabs(h[m * n + (m - 1)]) * (fabs(q) + fabs(r))
                v = fabs(p) * (
                    fabs(h[(m - 1) * n + (m - 1)]) + fabs(z) + fabs(h[(m + 1) * n + (m + 1)])
                )
                if u <= DBL_EPSILON * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                h[i * n + (i - 2)] = 0.0
                if i != m + 2:
                    h[i * n + (i - 3)] = 0.0
            # double QR sweep on rows l..nn, columns m..nn
            for k in range(m, nn):
                if k != m:
                    p = h[k * n + (k - 1)]
                    q = h[(k + 1) * n + (k - 1)]
                    r = 0.0
                    if k != nn - 1:
                        r = h[(k + 2) * n + (k - 1)]
                    x = fabs(p) + fabs(q) + fabs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = _sign(sqrt(p * p + q * q + r * r), p)
                if s != 0.0:
                    if k == m:
                        if l != m:
                            h[k * n + (k - 1)] = -h[k * n + (k - 1)]
                    else:
                        h[k * n + (k - 1)] = -s * x
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    for j in range(k, nn + 1):
                        p = h[k * n + j] + q * h[(k + 1) * n + j]
                        if k != nn - 1:
                            p += r * h[(k + 2) * n + j]
                            h[(k + 2) * n + j] -= p * z
                        h[(k + 1) * n + j] -= p * y
                        h[k * n + j] -= p * x
                    mmin = nn if nn < k + 3 else k + 3
                    for i in range(l, mmin + 1):
                        p = x * h[i * n + k] + y * h[i * n + (k + 1)]
                        if k != nn - 1:
                            p += z * h[i * n + (k + 2)]
                            h[i * n + (k + 2)] -= p * r
                        h[i * n + (k + 1)] -= p * q
                        h[i * n + k] -= p
    rho_out[0] = rho
    return 0


cdef int _lu_solve(double* g, double* x, int q) noexcept:
    """Gaussian elimination with partial pivoting on a q x q system."""
    cdef int i, j, k, piv
    cdef double best, tmp, factor
    for k in range(q):
        piv = k
        best = fabs(g[k * q + k])
        for i in range(k + 1, q):
            if fabs(g[i * q + k]) > best:
                best = fabs(g[i * q + k])
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(k, q):
                tmp = g[k * q + j]
                g[k * q + j] = g[piv * q + j]
                g[piv * q + j] = tmp
            tmp = x[k]
            x[k] = x[piv]
            x[piv] = tmp
        for i in range(k + 1, q):
            factor = g[i * q + k] / g[k * q + k]
            if factor != 0.0:
                for j in range(k + 1, q):
                    g[i * q + j] -= factor * g[k * q + j]
                x[i] -= factor * x[k]
            g[i * q + k] = 0.0
    for k in range(q - 1, -1, -1):
        tmp = x[k]
        for j in range(k + 1, q):
            tmp -= g[k * q + j] * x[j]
        x[k] = tmp / g[k * q + k]
    return 0


cdef int _lyap_solve(double* m, double* w, double* p_out, double* g, double* vec, int n) noexcept:
    """Solve P = W + M^T P M via the Kronecker lifting; symmetrizes output."""
    cdef int q = n * n
    cdef int a, b, c, d, row, col
    cdef double tmp
    for a in range(n):
        for c in range(n):
            row = a * n + c
            vec[row] = w[a * n + c]
            for b in range(n):
                for d in range(n):
                    col = b * n + d
                    tmp = -m[b * n + a] * m[d * n + c]
                    if row == col:
                        tmp += 1.0
                    g[row * q + col] = tmp
    if _lu_solve(g, vec, q) != 0:
        return -1
    for a in range(n):
        p_out[a * n + a] = vec[a * n + a]
        for c in range(a + 1, n):
            tmp = 0.5 * (vec[a * n + c] + vec[c * n + a])
            p_out[a * n + c] = tmp
            p_out[c * n + a] = tmp
    return 0


def spectral_radius(matrix):
    """Return max |eigenvalue| of a square matrix."""
    cdef double[:, ::1] h = np.array(matrix, dtype=np.float64, order="C")
    cdef int n = h.shape[0]
    cdef double[::1] v = np.zeros(n, dtype=np.float64)
    cdef double rho = 0.0
    _hessenberg(&h[0, 0], &v[0], n)
    if _hqr_rho(&h[0, 0], n, &rho) != 0:
        raise NumericalFailureError("eigenvalue iteration failed to converge")
    return rho


def solve_discrete_lyapunov(coeff, rhs):
    """Solve ``P = rhs + coeff^T P coeff``; output symmetrized."""
    cdef double[:, ::1] m = np.ascontiguousarray(coeff, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef int n = m.shape[0]
    cdef int q = n * n
    solution = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] p_view = solution
    cdef double[::1] g = np.empty(q * q, dtype=np.float64)
    cdef double[::1] vec = np.empty(q, dtype=np.float64)
    if _lyap_solve(&m[0, 0], &w[0, 0], &p_view[0, 0], &g[0], &vec[0], n) != 0:
        raise NumericalFailureError("Lyapunov solve broke down (singular lifting)")
    return solution


def closed_loop_cost_batch(a, b, q, r, sigma0, gains, double margin):
    """Evaluate ``trace(P_K Sigma0)`` for each gain in a batch.

    Returns ``(costs, rhos)``; a gain whose closed loop has spectral radius
    at or above ``1 - margin`` gets a NaN cost.
    """
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[:, ::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(sigma0, dtype=np.float64)
    cdef double[:, :, ::1] kv = np.ascontiguousarray(gains, dtype=np.float64)

    cdef int nx = av.shape[0]
    cdef int nu = bv.shape[1]
    cdef int batch = kv.shape[0]
    cdef int nsq = nx * nx

    costs = np.empty(batch, dtype=np.float64)
    rhos = np.empty(batch, dtype=np.float64)
    cdef double[::1] costs_v = costs
    cdef double[::1] rhos_v = rhos

    cdef double[::1] closed = np.empty(nsq, dtype=np.float64)
    cdef double[::1] weight = np.empty(nsq, dtype=np.float64)
    cdef double[::1] hess = np.empty(nsq, dtype=np.float64)
    cdef double[::1] pmat = np.empty(nsq, dtype=np.float64)
    cdef double[::1] house = np.empty(nx, dtype=np.float64)
    cdef double[::1] g = np.empty(nsq * nsq, dtype=np.float64)
    cdef double[::1] vec = np.empty(nsq, dtype=np.float64)

    cdef int s, i, j, u, v
    cdef double acc, rho, total
    cdef bint qr_failed = False

    for s in range(batch):
        for i in range(nx):
            for j in range(nx):
                acc = av[i, j]
                for u in range(nu):
                    acc -= bv[i, u] * kv[s, u, j]
                closed[i * nx + j] = acc
        for i in range(nx):
            for j in range(nx):
                acc = qv[i, j]
                for u in range(nu):
                    for v in range(nu):
                        acc += kv[s, u, i] * rv[u, v] * kv[s, v, j]
                weight[i * nx + j] = acc
        for i in range(nsq):
            hess[i] = closed[i]
        _hessenberg(&hess[0], &house[0], nx)
        if _hqr_rho(&hess[0], nx, &rho) != 0:
            qr_failed = True
            break
        rhos_v[s] = rho
        if rho >= 1.0 - margin:
            costs_v[s] = NAN
            continue
        if _lyap_solve(&closed[0], &weight[0], &pmat[0], &g[0], &vec[0], nx) != 0:
            qr_failed = True
            break
        total = 0.0
        for i in range(nx):
            for j in range(nx):
                total += pmat[i * nx + j] * sv[j, i]
        costs_v[s] = total

    if qr_failed:
        raise NumericalFailureError("closed-loop cost kernel failed to converge")
    return costs, rhos
