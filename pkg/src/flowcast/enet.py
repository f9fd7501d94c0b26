"""Weighted elastic net by cyclic coordinate descent.

Minimises, over an intercept and coefficients on standardised columns::

    (1/N) sum_i w_i * (y_i - b0 - x_i.b)**2 / 2
        + lam * ((1 - alpha) * ||b||_2**2 / 2 + alpha * ||b||_1)

Weights are rescaled to mean one. Coefficients are reported on both the
standardised and the original column scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels

# lambda_max is inflated by this factor so rounding in the kernel's inner
# products cannot leave a coefficient of order 1e-17 active at the boundary
_LAMBDA_MAX_GUARD = 1.0 + 1e-9


class ConvergenceError(RuntimeError):
    """Coordinate descent hit the sweep limit; ``last`` holds the iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


@dataclass
class DesignMatrix:
    """Regressor matrix, target and per-column standardisation.

    Rows with any missing cell are dropped at construction. Columns whose
    weighted standard deviation is zero are kept in ``names`` but flagged in
    ``usable`` and always receive a zero coefficient.
    """

    names: list[str]
    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    rows: list = field(default_factory=list)
    x_mean: np.ndarray = field(init=False)
    x_sd: np.ndarray = field(init=False)
    usable: np.ndarray = field(init=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64).reshape(len(self.y), len(self.names))
        y = np.asarray(self.y, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        ok = np.isfinite(y) & np.all(np.isfinite(X), axis=1)
        if np.any(np.isinf(X)) or np.any(np.isinf(y)):
            raise ValueError("non-finite inputs")
        rows = list(self.rows) if self.rows else list(range(len(y)))
        self.X, self.y, self.weights = X[ok], y[ok], w[ok]
        self.rows = [r for r, keep in zip(rows, ok) if keep]
        if self.y.size == 0:
            raise ValueError("design has no complete rows")
        wn = self.weights / self.weights.mean()
        self.weights = wn
        self.x_mean = (wn[:, None] * self.X).sum(axis=0) / wn.sum() if self.names else np.zeros(0)
        var = (wn[:, None] * (self.X - self.x_mean) ** 2).sum(axis=0) / wn.sum() if self.names else np.zeros(0)
        sd = np.sqrt(var)
        scale = np.maximum(1.0, np.abs(self.x_mean))
        self.usable = sd > 1e-12 * scale
        self.x_sd = np.where(self.usable, sd, 1.0)

    @classmethod
    def from_arrays(cls, X, y, names: Sequence[str] | None = None, weights=None, rows=None) -> "DesignMatrix":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]
        w = np.ones(len(y)) if weights is None else weights
        return cls(names, X, np.asarray(y, dtype=np.float64), np.asarray(w, dtype=np.float64), list(rows or []))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return len(self.names)

    def subset(self, start: int, stop: int) -> "DesignMatrix":
        """Rows ``start:stop`` with standardisation recomputed."""
        return DesignMatrix(self.names, self.X[start:stop], self.y[start:stop], self.weights[start:stop], self.rows[start:stop])

    def standardized(self) -> tuple[np.ndarray, np.ndarray, float]:
        """Centred/scaled columns (zero for unusable ones), centred y, y mean."""
        Z = (self.X - self.x_mean) / self.x_sd
        Z[:, ~self.usable] = 0.0
        ym = float((self.weights * self.y).sum() / self.weights.sum())
        return np.asfortranarray(Z), self.y - ym, ym


@dataclass
class EnetFit:
    names: list[str]
    intercept: float
    coef: np.ndarray
    coef_std: np.ndarray
    lam: float
    alpha: float
    mse: float
    n_sweeps: int
    x_mean: np.ndarray
    x_sd: np.ndarray
    objective_trace: list[float] | None = None

    @property
    def active(self) -> list[str]:
        return [n for n, b in zip(self.names, self.coef_std) if b != 0.0]

    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.coef)))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if not self.names:
            return np.full(X.shape[0], self.intercept)
        return self.intercept + X @ self.coef


def objective(Z, yc, w, beta, lam, alpha) -> float:
    """Penalised objective on the standardised problem (intercept profiled out)."""
    r = yc - Z @ beta
    n = yc.size
    return float((w * r * r).sum() / (2.0 * n) + lam * ((1 - alpha) * (beta @ beta) / 2.0 + alpha * np.abs(beta).sum()))


def _to_original(design: DesignMatrix, beta_std: np.ndarray, ym: float):
    coef = np.where(design.usable, beta_std / design.x_sd, 0.0)
    return ym - float(coef @ design.x_mean) if design.p else ym, coef


def enet_fit(
    design: DesignMatrix,
    alpha: float,
    lam: float,
    weights=None,
    tol: float = 1e-7,
    max_sweeps: int = 10_000,
    beta_init=None,
    trace: bool = False,
) -> EnetFit:
    """Fit at a single penalty by cyclic coordinate descent.

    Converged when the largest coefficient change in a sweep is below
    ``tol``. Raises :class:`ConvergenceError` after ``max_sweeps`` sweeps.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if weights is not None:
        design = DesignMatrix(design.names, design.X, design.y, np.asarray(weights, dtype=float), design.rows)
    Z, yc, ym = design.standardized()
    w = design.weights
    p = design.p
    beta = np.zeros(p) if beta_init is None else np.asarray(beta_init, dtype=np.float64).copy()
    history = None
    if p == 0:
        sweeps = 0
    elif trace:
        history = [objective(Z, yc, w, beta, lam, alpha)]
        sweeps = -1
        for k in range(1, max_sweeps + 1):
            betas, s = kernels.enet_path(Z, yc, w, np.array([lam]), alpha, tol, 1, beta)
            beta = betas[0]
            history.append(objective(Z, yc, w, beta, lam, alpha))
            if s[0] == 1:
                sweeps = k
                break
    else:
        betas, s = kernels.enet_path(Z, yc, w, np.array([lam]), alpha, tol, max_sweeps, beta)
        beta, sweeps = betas[0], int(s[0])
    b0, coef = _to_original(design, beta, ym)
    if sweeps < 0:
        raise ConvergenceError(f"no convergence after {max_sweeps} sweeps", last=beta)
    resid = design.y - b0 - (design.X @ coef if p else 0.0)
    mse = float((w * resid**2).sum() / w.sum())
    return EnetFit(list(design.names), b0, coef, beta, float(lam), float(alpha), mse, sweeps, design.x_mean, design.x_sd, history)


def lambda_max(design: DesignMatrix, alpha: float) -> float:
    """Smallest penalty at which every coefficient is zero."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0 for a lambda grid")
    Z, yc, _ = design.standardized()
    if design.p == 0:
        return 0.0
    if not np.any(yc != 0):
        raise ValueError("all-zero target")
    return float(np.max(np.abs(Z.T @ (design.weights * yc))) / (design.n * alpha)) * _LAMBDA_MAX_GUARD


def lambda_grid(design: DesignMatrix, alpha: float, size: int = 100, min_ratio: float = 1e-4) -> np.ndarray:
    """Log-spaced, strictly decreasing grid from lambda_max."""
    if size < 2:
        raise ValueError("grid size must be >= 2")
    top = lambda_max(design, alpha)
    if top <= 0:
        raise ValueError("all-zero target")
    return np.geomspace(top, top * min_ratio, size)


def enet_path(design: DesignMatrix, alpha: float, lambdas, tol: float = 1e-7, max_sweeps: int = 10_000):
    """Warm-started fits along ``lambdas``.

    Returns ``(intercepts, coefs, sweeps)`` with coefficients on the original
    scale; a sweep count of -1 flags a non-converged penalty.
    """
    Z, yc, ym = design.standardized()
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if design.p == 0:
        return np.full(lambdas.size, ym), np.zeros((lambdas.size, 0)), np.zeros(lambdas.size, dtype=np.int64)
    betas, sweeps = kernels.enet_path(Z, yc, design.weights, lambdas, alpha, tol, max_sweeps)
    coefs = np.where(design.usable, betas / design.x_sd, 0.0)
    intercepts = ym - coefs @ design.x_mean
    return intercepts, coefs, sweeps
