"""Per-dyad elastic-net forecasts of weekly applications.

The pipeline for one origin/destination pair at one as-of week:

1. build a design from the retained covariates plus lagged copies at the
   significant positive lead-lag estimates,
2. pick a penalty on rolling fitting windows (:func:`rolling_lambda_select`),
3. refit on the trailing ``prediction_win`` weeks,
4. extend the covariates ``n_ahead`` weeks (:func:`forecast_covariates`),
5. feed them through the fit and attach an ARMA(1,1) benchmark.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import ForecastConfig
from .earlywarning import EarlyWarningReport
from .enet import ConvergenceError, DesignMatrix, EnetFit, _to_original, enet_fit, enet_path, lambda_grid
from .timeseries import Panel, WeekIndex, WeeklySeries
from .tsmodels import ModelFitError, fit_arma11, fit_var1

logger = logging.getLogger(__name__)

LAG_SEP = "@lag"


class DyadFilteredError(ValueError):
    pass


def lagged_name(base: str, lag: int) -> str:
    return f"{base}{LAG_SEP}{lag}" if lag else base


@dataclass(frozen=True)
class Column:
    name: str
    base: str
    lag: int = 0


def design_columns(panel: Panel, lags: Mapping[str, int] | None = None) -> list[Column]:
    """Every covariate unshifted, plus a lagged copy for each positive lag."""
    cols = [Column(c, c, 0) for c in panel.covariate_ids]
    for base, lag in sorted((lags or {}).items()):
        if lag > 0 and base in panel.series and base != panel.target_id:
            cols.append(Column(lagged_name(base, lag), base, int(lag)))
    return cols


def build_design(panel: Panel, columns: Sequence[Column], n_rows: int | None = None) -> DesignMatrix:
    """Rows are the trailing ``n_rows`` weeks of ``panel``.

    A column lagged by k takes, at week t, its base series at week t - k.
    Rows with any missing cell are dropped.
    """
    T = panel.n_weeks
    first = 0 if n_rows is None else max(0, T - n_rows)
    X = np.full((T - first, len(columns)), np.nan)
    for j, col in enumerate(columns):
        v = panel.series[col.base].values
        src = np.arange(first, T) - col.lag
        ok = src >= 0
        X[ok, j] = v[src[ok]]
    y = panel.target.values[first:T]
    weeks = panel.weeks()[first:T]
    return DesignMatrix([c.name for c in columns], X, y, np.ones(T - first), list(weeks))


# -- penalty selection ----------------------------------------------------------


@dataclass
class LambdaSelection:
    lam: float
    fallback: bool
    grid: np.ndarray
    windows: list[tuple[int, float, float]]
    target_variance: float


def rolling_lambda_select(design: DesignMatrix, cfg: ForecastConfig, grid=None) -> LambdaSelection:
    """Penalty chosen on sliding fitting windows over the trailing year.

    Each window of ``prediction_win`` rows is fitted along the grid and scored
    on the next ``n_ahead`` rows; its best penalty is the one with the lowest
    held-out MSE (ties to the larger penalty). Window starts skip the first
    ``burn`` rows of the design. Among windows whose best MSE does not exceed
    the sample variance of the target, the smallest best penalty wins.
    Otherwise the penalty of the window with the lowest MSE is returned and
    ``fallback`` is set.
    """
    T, pw, h = design.n, cfg.prediction_win, cfg.n_ahead
    if T < cfg.burn + pw + h:
        raise ValueError(f"insufficient history: {T} rows, need {cfg.burn + pw + h}")
    if grid is None:
        grid = lambda_grid(design, cfg.alpha, cfg.lambda_grid_size, cfg.lambda_min_ratio)
    grid = np.asarray(grid, dtype=np.float64)
    first = max(cfg.burn, T - 52)
    windows = []
    for s in range(first, T - pw - h + 1):
        fit = design.subset(s, s + pw)
        b0, B, sweeps = enet_path(fit, cfg.alpha, grid)
        Xh, yh = design.X[s + pw : s + pw + h], design.y[s + pw : s + pw + h]
        pred = b0[:, None] + B @ Xh.T
        mse = np.mean((pred - yh) ** 2, axis=1)
        mse[sweeps < 0] = np.inf
        k = int(np.argmin(mse))
        windows.append((s, float(grid[k]), float(mse[k])))
    var = float(np.var(design.y, ddof=1))
    lam, fallback = pick_lambda(windows, var)
    return LambdaSelection(lam, fallback, grid, windows, var)


def pick_lambda(windows: Sequence[tuple[int, float, float]], variance: float) -> tuple[float, bool]:
    """Combine per-window ``(start, best_lambda, best_mse)`` into one penalty.

    Returns the smallest best penalty among windows with MSE <= ``variance``,
    or the penalty of the lowest-MSE window with ``fallback=True``.
    """
    if not windows:
        raise ValueError("no fitting windows")
    good = [w for w in windows if w[2] <= variance]
    if good:
        return min(w[1] for w in good), False
    best = min(windows, key=lambda w: w[2])
    logger.info("no window beat the target variance; using global best penalty %.4g", best[1])
    return best[1], True


# -- covariate extension --------------------------------------------------------


@dataclass
class CovariatePaths:
    paths: dict[str, np.ndarray]
    methods: dict[str, str]


def _trailing_finite(v: np.ndarray, n: int) -> np.ndarray:
    w = v[-n:]
    return w[np.isfinite(w)]


def _ffill(v: np.ndarray) -> np.ndarray:
    idx = np.where(np.isfinite(v), np.arange(v.size), 0)
    np.maximum.accumulate(idx, out=idx)
    return v[idx]


def _extend_bases(panel: Panel, bases: Sequence[str], steps: int, window: int) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    out: dict[str, np.ndarray] = {}
    methods: dict[str, str] = {}
    if not bases or steps <= 0:
        return out, methods
    for b in bases:
        tail = _trailing_finite(panel.series[b].values, window)
        if tail.size == 0 or np.ptp(tail) == 0:
            out[b] = np.full(steps, tail[-1] if tail.size else 0.0)
            methods[b] = "constant"
    rest = [b for b in bases if b not in out]
    if rest:
        Y = np.column_stack([panel.series[b].values[-window:] for b in rest])
        Y = Y[np.all(np.isfinite(Y), axis=1)]
        try:
            model = fit_var1(Y)
            path = model.forecast(Y[-1], steps)
            for j, b in enumerate(rest):
                out[b] = path[:, j]
                methods[b] = "var"
            return out, methods
        except ModelFitError as exc:
            logger.debug("VAR(1) rejected: %s", exc)
    for b in rest:
        tail = _trailing_finite(panel.series[b].values, window)
        try:
            out[b] = fit_arma11(tail).forecast(steps)
            methods[b] = "arma"
        except ModelFitError:
            out[b] = np.full(steps, tail.mean() if tail.size else 0.0)
            methods[b] = "mean"
    return out, methods


def forecast_covariates(panel: Panel, columns: Sequence[Column], cfg: ForecastConfig) -> CovariatePaths:
    """Values of each column for the ``n_ahead`` weeks after the panel end.

    A column lagged by k needs its base series only up to step ``h - k``;
    non-positive steps are read from the observed history. Bases that need
    simulating are extended jointly by a VAR(1) on the trailing
    ``prediction_win`` weeks, falling back per series to ARMA(1,1) and then
    to the trailing mean.
    """
    H = cfg.n_ahead
    need = {}
    for c in columns:
        steps = H - c.lag
        if steps > 0:
            need[c.base] = max(need.get(c.base, 0), steps)
    steps = max(need.values(), default=0)
    sim, methods = _extend_bases(panel, sorted(need), steps, cfg.prediction_win)
    paths = {}
    for c in columns:
        v = _ffill(panel.series[c.base].values)
        p = np.empty(H)
        for h in range(1, H + 1):
            k = h - c.lag
            p[h - 1] = v[v.size - 1 + k] if k <= 0 else sim[c.base][k - 1]
        paths[c.name] = p
        methods.setdefault(c.base, "observed")
    return CovariatePaths(paths, methods)


# -- benchmark ------------------------------------------------------------------


@dataclass
class BenchmarkForecast:
    values: np.ndarray
    method: str
    flagged: bool = False


def benchmark_arima(target: WeeklySeries, cfg: ForecastConfig) -> BenchmarkForecast:
    """ARMA(1,1) with intercept on the trailing ``training_weeks`` weeks."""
    y = _trailing_finite(target.values, cfg.training_weeks)
    if y.size < 20:
        raise ValueError(f"benchmark needs >= 20 observed values, got {y.size}")
    try:
        vals = fit_arma11(y).forecast(cfg.n_ahead)
        method, flagged = "arma", False
    except ModelFitError as exc:
        logger.info("benchmark fell back to the mean: %s", exc)
        vals, method, flagged = np.full(cfg.n_ahead, y.mean()), "mean", True
    return BenchmarkForecast(np.maximum(vals, 0.0), method, flagged)


# -- full forecast --------------------------------------------------------------


@dataclass
class DyadForecast:
    origin: str | None
    destination: str | None
    as_of: WeekIndex
    forecasts: np.ndarray
    lam: float
    lambda_fallback: bool
    model: EnetFit
    benchmark: np.ndarray
    benchmark_method: str
    covariate_paths: CovariatePaths
    columns: list[Column] = field(default_factory=list)
    final_design: DesignMatrix | None = None

    def rows(self) -> list[dict]:
        active = ";".join(self.model.active)
        return [
            {
                "origin": self.origin,
                "destination": self.destination,
                "as_of": str(self.as_of),
                "horizon": h + 1,
                "week": str(self.as_of + (h + 1)),
                "forecast": float(self.forecasts[h]),
                "benchmark": float(self.benchmark[h]),
                "chosen_lambda": self.lam,
                "active_set": active,
            }
            for h in range(self.forecasts.size)
        ]


def forecast_applications(
    panel: Panel,
    cfg: ForecastConfig,
    ew: EarlyWarningReport | None = None,
    origin: str | None = None,
    destination: str | None = None,
) -> DyadForecast:
    """Forecast the panel target ``n_ahead`` weeks past the panel end.

    ``ew`` supplies the analyzability verdict, the covariates that survived
    filtering and the significant lags. Without it every covariate enters
    unshifted.
    """
    if ew is not None:
        if not ew.analyzable:
            raise DyadFilteredError("dyad filtered out")
        keep = [sid for sid in ew.per_series if sid in panel.series]
        if panel.target_id not in keep:
            keep.append(panel.target_id)
        panel = panel.subset(keep)
        lags = ew.lags_for_target()
        origin = origin if origin is not None else ew.origin
    else:
        lags = {}
    columns = design_columns(panel, lags)
    design = build_design(panel, columns, cfg.training_weeks)
    final = design.subset(design.n - cfg.prediction_win, design.n)

    if design.p == 0 or np.ptp(design.y) == 0:
        sel = LambdaSelection(0.0, False, np.zeros(0), [], 0.0)
    else:
        sel = rolling_lambda_select(design, cfg)
    try:
        fit = enet_fit(final, cfg.alpha, sel.lam)
    except ConvergenceError as exc:
        logger.warning("final fit did not converge; using last iterate")
        fit = _fit_from_beta(final, cfg.alpha, sel.lam, exc.last)

    active_cols = [c for c in columns if c.name in set(fit.active)]
    paths = forecast_covariates(panel, active_cols, cfg)
    Xf = np.zeros((cfg.n_ahead, len(columns)))
    for j, c in enumerate(columns):
        if c.name in paths.paths:
            Xf[:, j] = paths.paths[c.name]
    point = np.maximum(fit.predict(Xf), 0.0)
    if not np.all(np.isfinite(point)):
        raise ValueError("non-finite forecast")
    bench = benchmark_arima(panel.target, cfg)
    return DyadForecast(
        origin, destination, panel.end, point, sel.lam, sel.fallback, fit,
        bench.values, bench.method, paths, columns, final,
    )


def _fit_from_beta(design: DesignMatrix, alpha: float, lam: float, beta) -> EnetFit:
    _, _, ym = design.standardized()
    b0, coef = _to_original(design, np.asarray(beta), ym)
    resid = design.y - b0 - design.X @ coef
    return EnetFit(list(design.names), b0, coef, np.asarray(beta), lam, alpha, float(np.mean(resid**2)), -1, design.x_mean, design.x_sd)
