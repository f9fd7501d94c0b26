"""Week-by-week simulated forecasting with error statistics.

At each as-of week the panel is truncated to that week, the model is run on
the truncated copy, and its ``n_ahead``-week total is compared with the
realised total and with the benchmark total.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .config import RunConfig
from .earlywarning import run_early_warning
from .forecaster import DyadFilteredError, forecast_applications
from .ranking import rf_importance
from .timeseries import Panel, WeekIndex, WeeklySeries, trailing_mean

logger = logging.getLogger(__name__)

TRAFFIC_CLASSES = ("very good", "good", "poor", "very poor")


@dataclass
class StepForecast:
    """What a model returns for one as-of week."""

    forecast: np.ndarray
    benchmark: np.ndarray
    lam: float = float("nan")
    active: tuple[str, ...] = ()
    status: str = "ok"
    importance: dict[str, float] | None = None


Model = Callable[[Panel, RunConfig], StepForecast]


def pipeline_model(panel: Panel, cfg: RunConfig, rank: bool = False) -> StepForecast:
    """Early warning followed by the elastic-net forecast."""
    ew = run_early_warning(panel, cfg.ew)
    try:
        fc = forecast_applications(panel, cfg.fc, ew)
    except DyadFilteredError:
        nan = np.full(cfg.fc.n_ahead, np.nan)
        return StepForecast(nan, nan, status="filtered")
    importance = None
    active = tuple(fc.model.active)
    if rank and active:
        d = fc.final_design
        idx = [d.names.index(a) for a in active]
        importance = rf_importance(d.X[:, idx], d.y, active, seed=cfg.ew.seed)
    return StepForecast(fc.forecasts, fc.benchmark, fc.lam, active, "ok", importance)


@dataclass
class BacktestRow:
    as_of: WeekIndex
    forecast: float
    benchmark: float
    actual: float
    status: str = "ok"
    lam: float = float("nan")
    active: tuple[str, ...] = ()
    importance: dict[str, float] | None = None

    @property
    def rel_err(self) -> float:
        return relative_error(self.forecast, self.actual)

    @property
    def abs_err(self) -> float:
        return abs(self.forecast - self.actual)


@dataclass
class BacktestResult:
    target_id: str
    rows: list[BacktestRow]
    summary: dict = field(default_factory=dict)
    traffic: str | None = None


def relative_error(forecast: float, actual: float) -> float:
    """Signed relative error in percent; NaN when the actual is not positive."""
    return 100.0 * (forecast - actual) / actual if actual > 0 else float("nan")


def _window_total(v: np.ndarray, i0: int, n: int) -> float:
    seg = v[i0 : i0 + n]
    if seg.size < n or np.any(np.isnan(seg)):
        return float("nan")
    return float(seg.sum())


def as_of_weeks(panel: Panel, cfg: RunConfig) -> list[WeekIndex]:
    first = WeekIndex.from_date(cfg.bt.start_date)
    final = WeekIndex.from_date(cfg.bt.final_date) if cfg.bt.final_date else panel.end
    last = final - cfg.fc.n_ahead
    if last < first:
        raise ValueError("backtest span shorter than n_ahead")
    return [first + k for k in range((last - first) + 1)]


def run_backtest(panel: Panel, cfg: RunConfig, model: Model | None = None) -> BacktestResult:
    """Back-test one dyad panel over the configured span.

    The model sees only weeks up to and including the as-of week. Raises
    ``ValueError`` when fewer than ``training_floor`` weeks precede the start.
    """
    model = model or pipeline_model
    weeks = as_of_weeks(panel, cfg)
    history = weeks[0] - panel.start
    if history < cfg.bt.training_floor:
        raise ValueError(f"insufficient pre-start history: {history} weeks, need {cfg.bt.training_floor}")
    y = panel.target.values
    H = cfg.fc.n_ahead
    rows = []
    for w in weeks:
        step = model(panel.truncate(w), cfg)
        i0 = (w - panel.start) + 1
        rows.append(
            BacktestRow(
                as_of=w,
                forecast=float(np.sum(step.forecast)),
                benchmark=float(np.sum(step.benchmark)),
                actual=_window_total(y, i0, H),
                status=step.status,
                lam=float(step.lam),
                active=tuple(step.active),
                importance=step.importance,
            )
        )
    summary = error_stats(rows)
    traffic = None
    if summary["n_weeks"]:
        m = summary["model"]
        traffic = traffic_light(m["rel"]["mean"], m["abs"]["mean"])
    return BacktestResult(panel.target_id, rows, summary, traffic)


def _describe(v: np.ndarray) -> dict[str, float]:
    if v.size == 0:
        return {k: float("nan") for k in ("mean", "median", "sd", "max", "min")}
    return {
        "mean": float(np.mean(v)),
        "median": float(np.median(v)),
        "sd": float(np.std(v, ddof=1)) if v.size > 1 else 0.0,
        "max": float(np.max(v)),
        "min": float(np.min(v)),
    }


def error_stats(rows) -> dict:
    """Summary of signed relative (%) and absolute errors.

    Only weeks where forecast, benchmark and actual are all available are
    evaluated, and the same weeks are used for model and benchmark. Weeks
    with a zero actual count towards absolute errors only. The sd of a
    single week is reported as 0.
    """
    F = np.array([r.forecast for r in rows], dtype=np.float64)
    B = np.array([r.benchmark for r in rows], dtype=np.float64)
    A = np.array([r.actual for r in rows], dtype=np.float64)
    ok = np.isfinite(F) & np.isfinite(B) & np.isfinite(A)
    F, B, A = F[ok], B[ok], A[ok]
    pos = A > 0
    out = {"n_weeks": int(ok.sum()), "n_rel_weeks": int(pos.sum())}
    for name, P in (("model", F), ("benchmark", B)):
        rel = 100.0 * (P[pos] - A[pos]) / A[pos]
        out[name] = {"rel": _describe(rel), "abs": _describe(np.abs(P - A))}
    return out


def traffic_light(mean_rel_pct: float, mean_abs: float) -> str:
    """Performance class from the magnitudes of the mean errors.

    Checked in order: very good (rel < 10% or abs < 10), good (abs <= 20),
    poor (abs <= 40), very poor.
    """
    r, a = abs(mean_rel_pct), abs(mean_abs)
    if r < 10 or a < 10:
        return "very good"
    if a <= 20:
        return "good"
    if a <= 40:
        return "poor"
    return "very poor"


def confidence_band(target: WeeklySeries, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trailing moving average with +/- 2 standard errors.

    The standard error at week t is the sample sd of the residuals
    (value - moving average) over the trailing window, divided by
    sqrt(window). Returns ``(center, lower, upper)``; the band is NaN where
    fewer than two residuals are available.
    """
    if window < 4:
        raise ValueError("window must be >= 4")
    v = target.values
    center = trailing_mean(v, window)
    resid = v - center
    half = np.full(v.size, np.nan)
    for t in range(v.size):
        r = resid[max(0, t - window + 1) : t + 1]
        r = r[np.isfinite(r)]
        if r.size >= 2:
            half[t] = 2.0 * np.std(r, ddof=1) / np.sqrt(window)
    return center, center - half, center + half


def run_backtests(panels: Mapping[str, Panel], cfg: RunConfig, model: Model | None = None, workers: int = 1) -> dict[str, BacktestResult]:
    """Back-test several dyads, optionally across processes."""
    if workers <= 1 or len(panels) <= 1:
        return {k: run_backtest(p, cfg, model) for k, p in panels.items()}
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = {k: pool.submit(run_backtest, p, cfg, model) for k, p in panels.items()}
        return {k: f.result() for k, f in futs.items()}
