"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _hy_cov(tx, x, ty, y, shift):
    nx, ny = len(tx), len(ty)
    j = 1
    total = 0.0
    for i in range(1, nx):
        a, b = tx[i - 1], tx[i]
        while j < ny and ty[j] - shift <= a:
            j += 1
        k = j
        s = 0.0
        while k < ny and ty[k - 1] - shift < b:
            s += y[k] - y[k - 1]
            k += 1
        total += (x[i] - x[i - 1]) * s
    return total


def hy_cov(tx, x, ty, y):
    """Sum of increment products over overlapping observation intervals."""
    return _hy_cov(list(tx), list(x), list(ty), list(y), 0.0)


def hy_contrast(tx, x, ty, y, lags):
    """HY covariance of X against Y with Y's clock moved back by each lag."""
    tx, x, ty, y = list(tx), list(x), list(ty), list(y)
    return np.array([_hy_cov(tx, x, ty, y, float(s)) for s in lags])


def enet_path(X, y, w, lambdas, alpha, tol=1e-7, max_sweeps=10000, beta_init=None):
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, p = X.shape
    xw2 = (w[:, None] * X**2).sum(axis=0) / n
    beta = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=np.float64)
    r = np.asarray(y, dtype=np.float64) - X @ beta
    wX = w[:, None] * X
    betas = np.empty((len(lambdas), p))
    sweeps = np.empty(len(lambdas), dtype=np.int64)
    for q, lam in enumerate(lambdas):
        l1, l2 = lam * alpha, lam * (1.0 - alpha)
        sweeps[q] = -1
        for sweep in range(1, max_sweeps + 1):
            maxdelta = 0.0
            for j in range(p):
                if xw2[j] <= 0.0:
                    continue
                z = wX[:, j] @ r / n + xw2[j] * beta[j]
                if z > l1:
                    bnew = (z - l1) / (xw2[j] + l2)
                elif z < -l1:
                    bnew = (z + l1) / (xw2[j] + l2)
                else:
                    bnew = 0.0
                delta = bnew - beta[j]
                if delta != 0.0:
                    r -= X[:, j] * delta
                    beta[j] = bnew
                    maxdelta = max(maxdelta, abs(delta))
            if maxdelta < tol:
                sweeps[q] = sweep
                break
        betas[q] = beta
    return betas, sweeps
