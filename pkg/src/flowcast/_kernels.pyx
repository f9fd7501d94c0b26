# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Hayashi-Yoshida sums and elastic-net coordinate descent.

The signatures mirror :mod:`flowcast._fallback` exactly; :mod:`flowcast.kernels`
picks whichever is importable.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef double _hy_cov(const double[::1] tx, const double[::1] x,
                    const double[::1] ty, const double[::1] y,
                    double shift) noexcept nogil:
    cdef Py_ssize_t nx = tx.shape[0], ny = ty.shape[0]
    cdef Py_ssize_t i, j = 1, k
    cdef double a, b, s, total = 0.0
    for i in range(1, nx):
        a = tx[i - 1]
        b = tx[i]
        while j < ny and ty[j] - shift <= a:
            j += 1
        k = j
        s = 0.0
        while k < ny and ty[k - 1] - shift < b:
            s += y[k] - y[k - 1]
            k += 1
        total += (x[i] - x[i - 1]) * s
    return total


def hy_cov(const double[::1] tx, const double[::1] x,
           const double[::1] ty, const double[::1] y):
    """Sum of increment products over overlapping observation intervals."""
    return _hy_cov(tx, x, ty, y, 0.0)


def hy_contrast(const double[::1] tx, const double[::1] x,
                const double[::1] ty, const double[::1] y,
                const double[::1] lags):
    """HY covariance of X against Y with Y's clock moved back by each lag."""
    cdef Py_ssize_t m = lags.shape[0], q
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for q in range(m):
            o[q] = _hy_cov(tx, x, ty, y, lags[q])
    return out


cdef int _cd(const double[::1, :] X, double[::1] r, const double[::1] w,
             const double[::1] xw2, double[::1] beta, double lam, double alpha,
             double tol, int max_sweeps) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], i, j
    cdef double l1 = lam * alpha, l2 = lam * (1.0 - alpha)
    cdef double z, bnew, delta, maxdelta, inv_n = 1.0 / n
    cdef int sweep
    for sweep in range(1, max_sweeps + 1):
        maxdelta = 0.0
        for j in range(p):
            if xw2[j] <= 0.0:
                continue
            z = 0.0
            for i in range(n):
                z += w[i] * X[i, j] * r[i]
            z = z * inv_n + xw2[j] * beta[j]
            if z > l1:
                bnew = (z - l1) / (xw2[j] + l2)
            elif z < -l1:
                bnew = (z + l1) / (xw2[j] + l2)
            else:
                bnew = 0.0
            delta = bnew - beta[j]
            if delta != 0.0:
                for i in range(n):
                    r[i] -= X[i, j] * delta
                beta[j] = bnew
                if fabs(delta) > maxdelta:
                    maxdelta = fabs(delta)
        if maxdelta < tol:
            return sweep
    return -1


def enet_path(X, y, w, lambdas, double alpha, double tol=1e-7,
              int max_sweeps=10000, beta_init=None):
    """Warm-started coordinate descent along ``lambdas``.

    ``X`` must be centred (weighted) and ``y`` centred. Returns the
    coefficient matrix (len(lambdas), p) and the sweep count per lambda,
    -1 marking a lambda that hit ``max_sweeps``.
    """
    cdef double[::1, :] Xv = np.asfortranarray(X, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lambdas, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], p = Xv.shape[1], L = lv.shape[0], q, j
    xw2_arr = (np.asarray(wv)[:, None] * np.asarray(Xv) ** 2).sum(axis=0) / n
    cdef double[::1] xw2 = np.ascontiguousarray(xw2_arr)
    if beta_init is None:
        beta_arr = np.zeros(p)
    else:
        beta_arr = np.array(beta_init, dtype=np.float64, copy=True)
    cdef double[::1] beta = beta_arr
    r_arr = np.ascontiguousarray(y, dtype=np.float64) - np.asarray(Xv) @ beta_arr
    cdef double[::1] r = r_arr
    betas = np.empty((L, p), dtype=np.float64)
    sweeps = np.empty(L, dtype=np.int64)
    cdef double[:, ::1] bv = betas
    cdef long long[::1] sv = sweeps
    with nogil:
        for q in range(L):
            sv[q] = _cd(Xv, r, wv, xw2, beta, lv[q], alpha, tol, max_sweeps)
            for j in range(p):
                bv[q, j] = beta[j]
    return betas, sweeps
