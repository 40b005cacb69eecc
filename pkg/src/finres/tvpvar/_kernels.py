"""Compiled inner loops of the Gibbs sampler.

All randomness is passed in as pre-drawn standard normals so the kernels are
deterministic functions of their arguments. Failures are reported through an
integer status (the 0-based time index that failed, or -1 on success) because
the Python wrapper owns error reporting.
"""

import numpy as np
from numba import njit

JITTER_START = 1e-10
JITTER_MAX = 1e-6


@njit(cache=True, nogil=True)
def _chol_into(a, L, work):
    """Cholesky of sym(a) into L, adding escalating diagonal jitter on failure.

    ``work`` is scratch of the same shape. Returns False if even the largest
    jitter fails.
    """
    n = a.shape[0]
    jitter = 0.0
    while True:
        for i in range(n):
            for j in range(n):
                work[i, j] = 0.5 * (a[i, j] + a[j, i])
            work[i, i] += jitter
        ok = True
        for j in range(n):
            d = work[j, j]
            for p in range(j):
                d -= L[j, p] * L[j, p]
            if not d > 0.0:
                ok = False
                break
            L[j, j] = np.sqrt(d)
            for i in range(j + 1, n):
                v = work[i, j]
                for p in range(j):
                    v -= L[i, p] * L[j, p]
                L[i, j] = v / L[j, j]
            for i in range(j):
                L[i, j] = 0.0
        if ok:
            return True
        if jitter == 0.0:
            jitter = JITTER_START
        elif jitter >= JITTER_MAX:
            return False
        else:
            jitter *= 10.0


@njit(cache=True, nogil=True)
def _chol_solve_into(L, b, x):
    """Solve (L L') x = b column by column; b and x are (n, c) and may not alias."""
    n = L.shape[0]
    for c in range(b.shape[1]):
        for i in range(n):
            v = b[i, c]
            for p in range(i):
                v -= L[i, p] * x[p, c]
            x[i, c] = v / L[i, i]
        for i in range(n - 1, -1, -1):
            v = x[i, c]
            for p in range(i + 1, n):
                v -= L[p, i] * x[p, c]
            x[i, c] = v / L[i, i]


@njit(cache=True, nogil=True)
def ffbs(y, Z, H, q, a0, P0, normals):
    """Forward filter, backward sample a random-walk state path.

    Model: y[t] = Z[t] x[t] + v[t], v ~ N(0, H[t]); x[t+1] = x[t] + w[t],
    w ~ N(0, diag(q)); x[0] ~ N(a0, P0).

    Shapes: y (n, p), Z (n, p, m), H (n, p, p), q (m,), a0 (m,), P0 (m, m),
    normals (n, m). Returns (x (n, m), status).
    """
    n, p = y.shape
    m = a0.shape[0]
    af = np.empty((n, m))
    Pf = np.empty((n, m, m))
    x = np.empty((n, m))
    a = a0.copy()
    P = P0.copy()
    PZ = np.empty((m, p))
    F = np.empty((p, p))
    LF = np.zeros((p, p))
    wp = np.empty((p, p))
    Kt = np.empty((p, m))
    err = np.empty((p, 1))
    v = np.empty((p, 1))
    R = np.empty((m, m))
    LR = np.zeros((m, m))
    wm = np.empty((m, m))
    Gt = np.empty((m, m))
    C = np.empty((m, m))
    mean = np.empty(m)

    for t in range(n):
        if t > 0:
            for i in range(m):
                a[i] = af[t - 1, i]
                for j in range(m):
                    P[i, j] = Pf[t - 1, i, j]
                P[i, i] += q[i]
        Zt = Z[t]
        for i in range(m):
            for r in range(p):
                s = 0.0
                for j in range(m):
                    s += P[i, j] * Zt[r, j]
                PZ[i, r] = s
        for r in range(p):
            for c in range(p):
                s = H[t, r, c]
                for j in range(m):
                    s += Zt[r, j] * PZ[j, c]
                F[r, c] = s
            s = y[t, r]
            for j in range(m):
                s -= Zt[r, j] * a[j]
            err[r, 0] = s
        if not _chol_into(F, LF, wp):
            return x, t
        _chol_solve_into(LF, PZ.T.copy(), Kt)
        _chol_solve_into(LF, err, v)
        for i in range(m):
            s = a[i]
            for r in range(p):
                s += PZ[i, r] * v[r, 0]
            af[t, i] = s
        for i in range(m):
            for j in range(i, m):
                s = P[i, j]
                for r in range(p):
                    s -= PZ[i, r] * Kt[r, j]
                Pf[t, i, j] = s
                Pf[t, j, i] = s

    if not _chol_into(Pf[n - 1], LR, wm):
        return x, n - 1
    for i in range(m):
        s = af[n - 1, i]
        for j in range(i + 1):
            s += LR[i, j] * normals[n - 1, j]
        x[n - 1, i] = s
    for t in range(n - 2, -1, -1):
        Pt = Pf[t]
        for i in range(m):
            for j in range(m):
                R[i, j] = Pt[i, j]
            R[i, i] += q[i]
        if not _chol_into(R, LR, wm):
            return x, t
        # Gt = R^{-1} P_t, so the smoother gain is Gt'
        _chol_solve_into(LR, Pt, Gt)
        for i in range(m):
            s = af[t, i]
            for j in range(m):
                s += Gt[j, i] * (x[t + 1, j] - af[t, j])
            mean[i] = s
        for i in range(m):
            for j in range(m):
                s = Pt[i, j]
                for l in range(m):
                    s -= Pt[i, l] * Gt[l, j]
                C[i, j] = s
        if not _chol_into(C, LR, wm):
            return x, t
        for i in range(m):
            s = mean[i]
            for j in range(i + 1):
                s += LR[i, j] * normals[t, j]
            x[t, i] = s
    return x, -1


@njit(cache=True, nogil=True)
def build_beta_system(Y, Xlag, A, h):
    """Measurement matrices for the coefficient block.

    Y (n, k) targets, Xlag (n, r) regressors shared by every equation,
    A (n, k, k) unit lower-triangular, h (n, k) log variances.
    Returns Z (n, k, k*r) and H (n, k, k) with H[t] = A^{-1} diag(exp h) A^{-T}.
    """
    n, k = Y.shape
    r = Xlag.shape[1]
    Z = np.zeros((n, k, k * r))
    H = np.empty((n, k, k))
    for t in range(n):
        for i in range(k):
            for j in range(r):
                Z[t, i, i * r + j] = Xlag[t, j]
        Ainv = np.linalg.inv(A[t])
        D = np.exp(h[t])
        for i in range(k):
            for j in range(k):
                s = 0.0
                for l in range(k):
                    s += Ainv[i, l] * D[l] * Ainv[j, l]
                H[t, i, j] = s
    return Z, H


@njit(cache=True, nogil=True)
def build_alpha_system(resid, h):
    """Measurement for the contemporaneous block.

    resid (n, k) are the VAR residuals. For row i >= 1:
    resid[t, i] = -sum_{j<i} a_ij resid[t, j] + sigma_i eps.
    Returns targets (n, k-1), Z (n, k-1, k(k-1)/2), H (n, k-1, k-1).
    """
    n, k = resid.shape
    na = k * (k - 1) // 2
    yy = np.empty((n, k - 1))
    Z = np.zeros((n, k - 1, na))
    H = np.zeros((n, k - 1, k - 1))
    for t in range(n):
        pos = 0
        for i in range(1, k):
            yy[t, i - 1] = resid[t, i]
            for j in range(i):
                Z[t, i - 1, pos] = -resid[t, j]
                pos += 1
            H[t, i - 1, i - 1] = np.exp(h[t, i])
    return yy, Z, H
