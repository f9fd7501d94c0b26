"""Small autoregressive models used to extend covariates and as a benchmark."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


class ModelFitError(RuntimeError):
    pass


@dataclass
class VAR1:
    """``y_t = c + A y_{t-1} + e_t``."""

    c: np.ndarray
    A: np.ndarray

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A)))) if self.A.size else 0.0

    def forecast(self, last, steps: int) -> np.ndarray:
        out = np.empty((steps, self.c.size))
        cur = np.asarray(last, dtype=np.float64)
        for h in range(steps):
            cur = self.c + self.A @ cur
            out[h] = cur
        return out


def fit_var1(Y) -> VAR1:
    """Least-squares VAR(1) with intercept.

    Raises :class:`ModelFitError` when the regression is under-determined or
    rank deficient, or when the fitted system is not stable.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    T, k = Y.shape
    if np.any(~np.isfinite(Y)):
        raise ModelFitError("missing values in VAR input")
    R = np.column_stack([np.ones(T - 1), Y[:-1]])
    if T - 1 <= k + 1:
        raise ModelFitError("too few observations for VAR(1)")
    if np.linalg.matrix_rank(R) < k + 1:
        raise ModelFitError("rank-deficient VAR regressors")
    B = np.linalg.lstsq(R, Y[1:], rcond=None)[0]
    model = VAR1(B[0].copy(), B[1:].T.copy())
    if model.spectral_radius() >= 1.0:
        raise ModelFitError("unstable VAR(1)")
    return model


@dataclass
class ARMA11:
    """``y_t = c + phi*y_{t-1} + e_t + theta*e_{t-1}``."""

    c: float
    phi: float
    theta: float
    sigma2: float
    last_y: float
    last_e: float

    @property
    def mean(self) -> float:
        return self.c / (1.0 - self.phi)

    def forecast(self, steps: int) -> np.ndarray:
        out = np.empty(steps)
        y, e = self.last_y, self.last_e
        for h in range(steps):
            y = self.c + self.phi * y + self.theta * e
            e = 0.0
            out[h] = y
        return out


def _arma_resid(params, y):
    c, phi, theta = params
    e = np.zeros(y.size)
    for t in range(1, y.size):
        e[t] = y[t] - c - phi * y[t - 1] - theta * e[t - 1]
    return e[1:]


def fit_arma11(y) -> ARMA11:
    """Conditional least squares, with the pre-sample innovation set to zero.

    A constant series gives the degenerate model that forecasts the constant.
    Raises :class:`ModelFitError` if the optimiser fails or the estimate is
    non-stationary or non-invertible.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.size < 5 or np.any(~np.isfinite(y)):
        raise ModelFitError("ARMA(1,1) needs at least 5 finite values")
    if np.ptp(y) == 0:
        return ARMA11(float(y[0]), 0.0, 0.0, 0.0, float(y[-1]), 0.0)
    x0, x1 = y[:-1], y[1:]
    vx = np.var(x0)
    phi0 = float(np.clip(np.cov(x0, x1, bias=True)[0, 1] / vx, -0.9, 0.9)) if vx > 0 else 0.0
    start = np.array([y.mean() * (1 - phi0), phi0, 0.0])
    scale = max(np.std(y), 1e-12)
    try:
        res = least_squares(
            lambda p: _arma_resid(p, y) / scale,
            start,
            bounds=([-np.inf, -0.999, -0.999], [np.inf, 0.999, 0.999]),
            xtol=1e-12,
            ftol=1e-12,
            gtol=1e-12,
            max_nfev=2000,
        )
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ModelFitError(str(exc)) from None
    if not res.success or not np.all(np.isfinite(res.x)):
        raise ModelFitError(f"ARMA(1,1) did not converge: {res.message}")
    c, phi, theta = map(float, res.x)
    if abs(phi) >= 0.999 or abs(theta) >= 0.999:
        raise ModelFitError("ARMA(1,1) estimate on the stationarity/invertibility boundary")
    e = _arma_resid(res.x, y)
    return ARMA11(c, phi, theta, float(np.mean(e**2)), float(y[-1]), float(e[-1]))
