import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowcast.enet import (
    ConvergenceError,
    DesignMatrix,
    enet_fit,
    enet_path,
    lambda_grid,
    lambda_max,
)


def orthonormal_design(rng, n=40, p=5):
    """Centred columns with Z'Z/n = I, so they are already standardised."""
    A = rng.normal(size=(n, p))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    Z = Q * np.sqrt(n)
    y = Z @ rng.normal(scale=2.0, size=p) + rng.normal(size=n)
    return DesignMatrix.from_arrays(Z, y), Z, y


def random_design(rng, n=30, p=6):
    X = rng.normal(size=(n, p)) * rng.uniform(0.5, 20, size=p) + rng.uniform(-50, 50, size=p)
    y = X[:, :3] @ np.array([1.5, -2.0, 0.7]) + rng.normal(scale=3.0, size=n)
    return DesignMatrix.from_arrays(X, y)


def soft(z, g):
    return np.sign(z) * np.maximum(np.abs(z) - g, 0.0)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.3, 1.0, 4.0])
def test_ridge_closed_form(lam):
    d, Z, y = orthonormal_design(np.random.default_rng(1))
    ols = Z.T @ (y - y.mean()) / y.size
    fit = enet_fit(d, alpha=0.0, lam=lam)
    assert np.allclose(fit.coef_std, ols / (1 + lam), atol=1e-8)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.3, 1.0, 4.0])
def test_lasso_closed_form(lam):
    d, Z, y = orthonormal_design(np.random.default_rng(2))
    ols = Z.T @ (y - y.mean()) / y.size
    fit = enet_fit(d, alpha=1.0, lam=lam)
    assert np.allclose(fit.coef_std, soft(ols, lam), atol=1e-8)


def test_zero_penalty_is_least_squares():
    d = random_design(np.random.default_rng(3))
    fit = enet_fit(d, alpha=0.5, lam=0.0)
    A = np.column_stack([np.ones(d.n), d.X])
    beta = np.linalg.lstsq(A, d.y, rcond=None)[0]
    assert fit.intercept == pytest.approx(beta[0], abs=1e-6)
    assert np.allclose(fit.coef, beta[1:], atol=1e-6)


def subgradient_gap(d, fit, lam, alpha):
    Z, yc, _ = d.standardized()
    b = fit.coef_std
    g = -(Z.T @ (d.weights * (yc - Z @ b))) / d.n
    act = b != 0
    gap_active = np.abs(g[act] + lam * alpha * np.sign(b[act]) + lam * (1 - alpha) * b[act])
    gap_inactive = np.maximum(np.abs(g[~act]) - lam * alpha, 0.0)
    return max(gap_active.max(initial=0.0), gap_inactive.max(initial=0.0))


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.floats(1e-3, 0.9))
def test_subgradient_optimality(seed, alpha, frac):
    d = random_design(np.random.default_rng(seed))
    lam = frac * lambda_max(d, alpha)
    fit = enet_fit(d, alpha, lam)
    assert subgradient_gap(d, fit, lam, alpha) < 1e-6


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(1e-3, 2.0))
def test_objective_non_increasing(seed, alpha, lam):
    d = random_design(np.random.default_rng(seed))
    trace = enet_fit(d, alpha, lam, trace=True).objective_trace
    assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_warm_equals_cold(seed):
    d = random_design(np.random.default_rng(seed))
    grid = lambda_grid(d, 0.5, size=20, min_ratio=1e-3)
    b0, B, sweeps = enet_path(d, 0.5, grid)
    assert np.all(sweeps >= 0)
    for k, lam in enumerate(grid):
        cold = enet_fit(d, 0.5, lam)
        assert np.allclose(B[k], cold.coef, atol=1e-6 * max(1, np.abs(cold.coef).max()))
        assert b0[k] == pytest.approx(cold.intercept, abs=1e-5)


@given(st.integers(0, 2**32 - 1), st.integers(0, 5), st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_affine_rescaling_invariance(seed, j, a, b):
    rng = np.random.default_rng(seed)
    d = random_design(rng)
    X2 = d.X.copy()
    X2[:, j] = a * X2[:, j] + b
    d2 = DesignMatrix.from_arrays(X2, d.y)
    lam = 0.1 * lambda_max(d, 0.5)
    p1 = enet_fit(d, 0.5, lam).predict(d.X)
    p2 = enet_fit(d2, 0.5, lam).predict(X2)
    assert np.max(np.abs(p1 - p2)) < 1e-6 * max(1.0, np.abs(p1).max())


def test_lambda_max_empties_active_set():
    for seed in range(10):
        d = random_design(np.random.default_rng(seed))
        top = lambda_max(d, 0.5)
        assert enet_fit(d, 0.5, top).active == []
        assert enet_fit(d, 0.5, 2 * top).active == []
        assert enet_fit(d, 0.5, 0.9 * top).active != []


def test_doubling_y_doubles_lambda_max():
    d = random_design(np.random.default_rng(4))
    d2 = DesignMatrix.from_arrays(d.X, 2 * d.y)
    assert lambda_max(d2, 0.5) == pytest.approx(2 * lambda_max(d, 0.5), rel=1e-12)


def test_grid_shape():
    d = random_design(np.random.default_rng(5))
    g = lambda_grid(d, 0.5, size=100, min_ratio=1e-4)
    assert g.size == 100 and np.all(np.diff(g) < 0)
    assert g[-1] == pytest.approx(g[0] * 1e-4)


def test_grid_rejects_constant_target():
    d = DesignMatrix.from_arrays(np.random.default_rng(0).normal(size=(20, 3)), np.full(20, 3.0))
    with pytest.raises(ValueError, match="all-zero target"):
        lambda_grid(d, 0.5)


def test_constant_column_stays_zero():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 3))
    X[:, 1] = 7.0
    d = DesignMatrix.from_arrays(X, X[:, 0] * 3 + rng.normal(size=30))
    fit = enet_fit(d, 0.5, 0.0)
    assert fit.coef[1] == 0.0


def test_missing_rows_dropped():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 2))
    X[3, 1] = np.nan
    d = DesignMatrix.from_arrays(X, rng.normal(size=30))
    assert d.n == 29


def test_convergence_error_carries_iterate():
    d = random_design(np.random.default_rng(8))
    with pytest.raises(ConvergenceError) as exc:
        enet_fit(d, 0.5, 1e-4, tol=1e-15, max_sweeps=1)
    assert exc.value.last is not None and exc.value.last.shape == (d.p,)


def test_rejects_bad_arguments():
    d = random_design(np.random.default_rng(9))
    with pytest.raises(ValueError):
        enet_fit(d, 0.5, -1.0)
    with pytest.raises(ValueError):
        enet_fit(d, 1.5, 0.1)
