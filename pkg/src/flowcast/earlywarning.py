"""Early-warning signals for one origin panel.

Filtering drops uninformative series; each retained series then gets a
momentum scan and two change-point tests, and every covariate is tested for
a lead-lag relation with the target through the Hayashi-Yoshida contrast.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
import pandas as pd
from scipy import stats

from . import kernels
from .config import EarlyWarningConfig
from .timeseries import (
    Panel,
    WeekIndex,
    WeeklySeries,
    coefficient_of_variation,
    months_to_weeks,
    trailing_mean,
)

logger = logging.getLogger(__name__)

KIND_PREFIXES = {
    "applicant.": "applications",
    "ibc.": "ibc",
    "pending.": "pending",
    "decision.": "decisions",
}
THRESHOLD_FIELD = {
    "applications": "applicant_thr",
    "ibc": "ibc_thr",
    "pending": "pending_thr",
    "decisions": "decision_thr",
}
THRESHOLD_REASON = {
    "applications": "applicant_thr",
    "ibc": "ibc_thr",
    "pending": "pending_thr",
    "decisions": "decision_thr",
}


def series_kind(s: WeeklySeries) -> str:
    if s.kind:
        return s.kind
    for prefix, kind in KIND_PREFIXES.items():
        if s.id.startswith(prefix):
            return kind
    return ""


@dataclass
class FilterResult:
    panel: Panel
    drops: list[tuple[str, str]]
    analyzable: bool = True
    target_failure: str | None = None


def _drop_reason(s: WeeklySeries, cfg: EarlyWarningConfig, clean_weeks: int) -> str | None:
    if s.missing_fraction() > cfg.na_thr:
        return "na"
    try:
        cv = coefficient_of_variation(s)
    except ValueError as exc:
        return "cv" if "undefined" in str(exc) else "na"
    if cv < cfg.cv_thr:
        return "cv"
    kind = series_kind(s)
    if kind in THRESHOLD_FIELD:
        recent = s.values[-clean_weeks:]
        recent = recent[~np.isnan(recent)]
        if recent.size == 0 or recent.max() < getattr(cfg, THRESHOLD_FIELD[kind]):
            return THRESHOLD_REASON[kind]
    return None


def filter_panel(panel: Panel, cfg: EarlyWarningConfig) -> FilterResult:
    """Drop series with too many gaps, too little variation, or too low levels.

    Level thresholds only look at the trailing ``clean_w`` months. The target
    is never dropped; if it fails a rule the panel is flagged unanalyzable.
    """
    if not panel.series:
        raise ValueError("empty panel")
    clean_weeks = months_to_weeks(cfg.clean_w)
    drops = []
    keep = {}
    target_failure = None
    for sid, s in panel.series.items():
        reason = _drop_reason(s, cfg, clean_weeks)
        if sid == panel.target_id:
            keep[sid] = s
            target_failure = reason
        elif reason is None:
            keep[sid] = s
        else:
            drops.append((sid, reason))
    return FilterResult(Panel(keep, panel.target_id), drops, target_failure is None, target_failure)


# -- change points ----------------------------------------------------------


@dataclass(frozen=True)
class ChangePointResult:
    location: WeekIndex | None
    statistic: float
    p_value: float
    kind: str
    index: int | None = None  # position of the first post-change observation


SIEGMUND_RHO = 0.5826


def _observed_window(s: WeeklySeries, window_weeks: int):
    tail = s.tail(window_weeks)
    ok = ~np.isnan(tail.values)
    return tail.values[ok], [tail.start + int(i) for i in np.flatnonzero(ok)]


def cusum_mean_stat(x: np.ndarray) -> tuple[float, int]:
    """Standardised max |partial sum of deviations| and its split point."""
    n = x.size
    sd = x.std(ddof=1)
    if not sd > 1e-12 * max(1.0, np.abs(x).max()):
        return 0.0, -1
    partial = np.cumsum(x - x.mean())[:-1]
    k = int(np.argmax(np.abs(partial)))
    return float(abs(partial[k]) / (sd * np.sqrt(n))), k + 1


def cusum_variance_stat(x: np.ndarray) -> tuple[float, int]:
    """Centred cumulative sum of squared residuals (Inclan-Tiao scaling)."""
    n = x.size
    a2 = (x - x.mean()) ** 2
    total = a2.sum()
    if not total > 1e-24 * max(1.0, np.abs(x).max()) ** 2 * n:
        return 0.0, -1
    d = np.cumsum(a2)[:-1] / total - np.arange(1, n) / n
    k = int(np.argmax(np.abs(d)))
    return float(np.sqrt(n / 2.0) * abs(d[k])), k + 1


def _changepoint(s, window_weeks, pvalue, kind, stat_fn):
    x, weeks = _observed_window(s, window_weeks)
    if x.size < 8:
        raise ValueError("insufficient data")
    stat, split = stat_fn(x)
    # Siegmund's overshoot term maps the discrete maximum onto the
    # continuous Brownian-bridge supremum
    p = float(stats.kstwobign.sf(stat + SIEGMUND_RHO / np.sqrt(x.size))) if stat > 0 else 1.0
    p = min(max(p, 0.0), 1.0)
    if p < pvalue:
        return ChangePointResult(weeks[split], stat, p, kind, split)
    return ChangePointResult(None, stat, p, kind, None)


def changepoint_mean(s: WeeklySeries, window_weeks: int = 52, pvalue: float = 0.05) -> ChangePointResult:
    """CUSUM test for a single shift in level over the trailing window.

    The p-value is the Kolmogorov tail of the standardised statistic with a
    finite-sample overshoot correction.
    """
    return _changepoint(s, window_weeks, pvalue, "mean", cusum_mean_stat)


def changepoint_variance(s: WeeklySeries, window_weeks: int = 52, pvalue: float = 0.05) -> ChangePointResult:
    """CUSUM-of-squares test for a single shift in volatility."""
    return _changepoint(s, window_weeks, pvalue, "variance", cusum_variance_stat)


# -- momentum ---------------------------------------------------------------


def momentum_signal(s: WeeklySeries, cfg: EarlyWarningConfig) -> list[tuple[WeekIndex, float]]:
    """Weeks where the short/long trailing-mean ratio leaves [1/ma_thr, ma_thr]."""
    if np.count_nonzero(~np.isnan(s.values)) < cfg.ma2:
        raise ValueError(f"series {s.id!r} has fewer than ma2={cfg.ma2} observations")
    short = trailing_mean(s.values, cfg.ma1)
    long_ = trailing_mean(s.values, cfg.ma2)
    fired = []
    for t in range(cfg.ma2 - 1, len(s)):
        lo, sh = long_[t], short[t]
        if not (np.isfinite(lo) and np.isfinite(sh)) or lo <= 0:
            continue
        ratio = sh / lo
        if ratio > cfg.ma_thr or ratio < 1.0 / cfg.ma_thr:
            fired.append((s.start + t, float(ratio)))
    return fired


# -- Hayashi-Yoshida lead-lag -------------------------------------------------


def _clock(s: WeeklySeries, origin: WeekIndex):
    ok = ~np.isnan(s.values)
    t = np.flatnonzero(ok).astype(np.float64) + float(s.start - origin)
    return np.ascontiguousarray(t), np.ascontiguousarray(s.values[ok])


def hy_covariance(X: WeeklySeries, Y: WeeklySeries) -> float:
    """Hayashi-Yoshida covariance of two possibly gappy weekly series.

    Increments run between consecutive observed weeks of each series and a
    pair of increments contributes when their intervals overlap.
    """
    tx, x = _clock(X, X.start)
    ty, y = _clock(Y, X.start)
    if tx.size < 2 or ty.size < 2:
        raise ValueError("degenerate series: need two observations for an increment")
    return float(kernels.hy_cov(tx, x, ty, y))


@dataclass(frozen=True)
class LagEstimate:
    theta_hat: int
    contrast_value: float
    p_value: float
    leader: str
    lagger: str
    contrast: Mapping[int, float] = field(default_factory=dict)
    lag_pvalues: Mapping[int, float] = field(default_factory=dict)
    ratio: float | None = None

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "contrast_value": self.contrast_value,
            "p_value": self.p_value,
            "leader": self.leader,
            "lagger": self.lagger,
            "ratio": self.ratio,
        }


def _pick_lag(lags: np.ndarray, u: np.ndarray) -> int:
    """Argmax of |U| with ties to smaller |lag|, then to the positive lag."""
    mag = np.abs(u)
    best = mag.max()
    order = sorted(range(lags.size), key=lambda i: (abs(int(lags[i])), int(lags[i]) < 0))
    for i in order:
        if mag[i] >= best * (1.0 - 1e-12):
            return i
    raise AssertionError("unreachable")


def _seed_for(seed: int, *names: str) -> list[int]:
    return [seed] + [zlib.crc32(n.encode("utf-8")) for n in names]


def lead_lag(X: WeeklySeries, Y: WeeklySeries, cfg: EarlyWarningConfig) -> LagEstimate:
    """Integer-week lag maximising the absolute HY contrast.

    ``U(theta)`` pairs X at week s with Y at week s + theta, so a positive
    estimate means X leads Y. Significance comes from circular shifts of Y
    large enough that no lag in the grid can realign it with X (offsets in
    ``[2*delta_max + 1, n - 2*delta_max - 1]``); the null statistic is the maximum |U| over
    the lag grid, which also yields a per-lag p-value.
    """
    D = cfg.delta_max
    lags = np.arange(-D, D + 1, dtype=np.float64)
    tx, x = _clock(X, X.start)
    ty, y = _clock(Y, X.start)
    if tx.size < 2 or ty.size < 2:
        raise ValueError("all contrast values undefined: need two observations per series")
    u = np.asarray(kernels.hy_contrast(tx, x, ty, y, lags))
    if not np.all(np.isfinite(u)):
        raise ValueError("contrast undefined")
    i = _pick_lag(lags, u)
    theta = int(lags[i])
    mag = np.abs(u)

    yvals = Y.values
    n = yvals.size
    if n > 4 * D + 2 and cfg.n_permutations > 0:
        rng = np.random.default_rng(_seed_for(cfg.seed, X.id, Y.id))
        null = np.empty(cfg.n_permutations)
        offset0 = float(Y.start - X.start)
        base = np.arange(n, dtype=np.float64) + offset0
        for b in range(cfg.n_permutations):
            rolled = np.roll(yvals, int(rng.integers(2 * D + 1, n - 2 * D)))
            ok = ~np.isnan(rolled)
            ub = kernels.hy_contrast(
                tx, x, np.ascontiguousarray(base[ok]), np.ascontiguousarray(rolled[ok]), lags
            )
            null[b] = np.max(np.abs(ub))
        denom = cfg.n_permutations + 1.0
        lag_p = {int(l): float((1 + np.count_nonzero(null >= m * (1 - 1e-12))) / denom) for l, m in zip(lags, mag)}
    else:
        logger.warning("series %s too short for permutation test; p-values set to 1", Y.id)
        lag_p = {int(l): 1.0 for l in lags}

    leader, lagger = (X.id, Y.id) if theta >= 0 else (Y.id, X.id)
    return LagEstimate(
        theta_hat=theta,
        contrast_value=float(u[i]),
        p_value=lag_p[theta],
        leader=leader,
        lagger=lagger,
        contrast={int(l): float(v) for l, v in zip(lags, u)},
        lag_pvalues=lag_p,
    )


def llr_select(est: LagEstimate, llag_thr: float) -> LagEstimate:
    """Choose between the shortest significant positive and negative lags.

    When both sides carry a significant effect, the stronger of the two
    shortest lags wins (ties go to the positive lag) and ``ratio`` records
    |U(theta+)| / |U(theta-)|. Otherwise the estimate passes through.
    """
    sig = [l for l, p in est.lag_pvalues.items() if p < llag_thr]
    pos = [l for l in sig if l > 0]
    neg = [l for l in sig if l < 0]
    if not pos or not neg:
        return est
    tp, tn = min(pos), max(neg)
    up, un = abs(est.contrast[tp]), abs(est.contrast[tn])
    chosen = tp if up >= un else tn
    ratio = up / un if un > 0 else float("inf")
    x_id, y_id = (est.leader, est.lagger) if est.theta_hat >= 0 else (est.lagger, est.leader)
    leader, lagger = (x_id, y_id) if chosen > 0 else (y_id, x_id)
    return replace(
        est,
        theta_hat=chosen,
        contrast_value=est.contrast[chosen],
        p_value=est.lag_pvalues[chosen],
        leader=leader,
        lagger=lagger,
        ratio=ratio,
    )


def lead_lag_ratio(X: WeeklySeries, Y: WeeklySeries, cfg: EarlyWarningConfig) -> LagEstimate:
    return llr_select(lead_lag(X, Y, cfg), cfg.llag_thr)


def _pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    ok = ~(np.isnan(a) | np.isnan(b))
    n = int(ok.sum())
    if n < 3:
        return float("nan"), n
    a, b = a[ok], b[ok]
    if a.std() == 0 or b.std() == 0:
        return float("nan"), n
    return float(np.corrcoef(a, b)[0, 1]), n


def lagged_correlation_matrix(panel: Panel, lags: Mapping[str, int]) -> pd.DataFrame:
    """Pearson correlation of the target with each covariate, unshifted and
    with the covariate moved forward by its estimated lead."""
    y = panel.target.values
    rows = []
    for cid, theta in lags.items():
        x = panel.series[cid].values
        r0, n0 = _pearson(x, y)
        theta = int(theta)
        if theta > 0:
            r1, n1 = _pearson(x[:-theta], y[theta:])
        elif theta < 0:
            r1, n1 = _pearson(x[-theta:], y[:theta])
        else:
            r1, n1 = r0, n0
        rows.append({"series": cid, "lag": theta, "r_unshifted": r0, "r_shifted": r1, "n_unshifted": n0, "n_shifted": n1})
    df = pd.DataFrame(rows, columns=["series", "lag", "r_unshifted", "r_shifted", "n_unshifted", "n_shifted"])
    return df.set_index("series")


# -- summary ----------------------------------------------------------------


@dataclass
class SeriesSignals:
    series_id: str
    momentum: list[tuple[WeekIndex, float]]
    mean_cp: ChangePointResult
    var_cp: ChangePointResult
    alert_level: int = 0

    def to_dict(self) -> dict:
        def cp(c):
            return {
                "location": str(c.location) if c.location else None,
                "statistic": c.statistic,
                "p_value": c.p_value,
            }

        return {
            "alert_level": f"L{self.alert_level}",
            "momentum": [[str(w), r] for w, r in self.momentum],
            "mean_cp": cp(self.mean_cp),
            "var_cp": cp(self.var_cp),
        }


@dataclass
class EarlyWarningReport:
    origin: str | None
    target_id: str
    as_of: WeekIndex
    per_series: dict[str, SeriesSignals]
    lag_matrix: dict[tuple[str, str], LagEstimate]
    lagged_correlations: pd.DataFrame
    drops: list[tuple[str, str]] = field(default_factory=list)
    analyzable: bool = True
    applicants_last_month: float = float("nan")
    total_alerts: int = 0
    alerts_last_week: int = 0
    trend_sign: int = 0

    def lags_for_target(self) -> dict[str, int]:
        return {x: est.theta_hat for (x, y), est in self.lag_matrix.items() if y == self.target_id}

    def to_dict(self) -> dict:
        corr = self.lagged_correlations.reset_index().to_dict(orient="records")
        return {
            "origin": self.origin,
            "target": self.target_id,
            "as_of": str(self.as_of),
            "analyzable": self.analyzable,
            "applicants_last_month": self.applicants_last_month,
            "total_alerts": self.total_alerts,
            "alerts_last_week": self.alerts_last_week,
            "trend": self.trend_sign,
            "dropped": [{"series": s, "reason": r} for s, r in self.drops],
            "series": {k: v.to_dict() for k, v in self.per_series.items()},
            "lead_lag": [{"x": x, "y": y, **est.to_dict()} for (x, y), est in self.lag_matrix.items()],
            "lagged_correlations": corr,
        }


_NO_CP = {"mean": ChangePointResult(None, float("nan"), 1.0, "mean"), "variance": ChangePointResult(None, float("nan"), 1.0, "variance")}


def series_signals(s: WeeklySeries, cfg: EarlyWarningConfig) -> SeriesSignals:
    window = months_to_weeks(cfg.alert_w)
    try:
        mom = momentum_signal(s, cfg)
    except ValueError:
        mom = []
    try:
        mcp = changepoint_mean(s, window, cfg.pvalue)
    except ValueError:
        mcp = _NO_CP["mean"]
    try:
        vcp = changepoint_variance(s, window, cfg.pvalue)
    except ValueError:
        vcp = _NO_CP["variance"]
    return SeriesSignals(s.id, mom, mcp, vcp)


def alert_level(sig: SeriesSignals, as_of: WeekIndex, cfg: EarlyWarningConfig) -> int:
    """Number of signal classes fired inside the alert window, capped at 3."""
    horizon = as_of - (months_to_weeks(cfg.alert_w) - 1)
    fired = 0
    if any(w >= horizon for w, _ in sig.momentum):
        fired += 1
    if sig.mean_cp.p_value < cfg.pvalue:
        fired += 1
    if sig.var_cp.p_value < cfg.pvalue:
        fired += 1
    return min(fired, 3)


def trend_sign(y: np.ndarray, weeks: int = 12) -> int:
    tail = np.asarray(y[-weeks:], dtype=float)
    t = np.arange(tail.size, dtype=float)
    ok = ~np.isnan(tail)
    if ok.sum() < 2:
        return 0
    slope = np.polyfit(t[ok], tail[ok], 1)[0]
    scale = max(1.0, np.nanmax(np.abs(tail)))
    if abs(slope) < 1e-12 * scale:
        return 0
    return int(np.sign(slope))


def alert_summary(
    signals: Mapping[str, SeriesSignals],
    target: WeeklySeries,
    cfg: EarlyWarningConfig,
    lag_matrix=None,
    lagged_correlations=None,
    origin=None,
    drops=(),
    analyzable=True,
) -> EarlyWarningReport:
    as_of = target.end
    per = {}
    for sid, sig in signals.items():
        sig.alert_level = alert_level(sig, as_of, cfg)
        per[sid] = sig
    last_week = sum(
        1
        for sig in per.values()
        if any(w == as_of for w, _ in sig.momentum)
        or sig.mean_cp.location == as_of
        or sig.var_cp.location == as_of
    )
    recent = target.values[-4:]
    return EarlyWarningReport(
        origin=origin,
        target_id=target.id,
        as_of=as_of,
        per_series=per,
        lag_matrix=dict(lag_matrix or {}),
        lagged_correlations=lagged_correlations if lagged_correlations is not None else lagged_correlation_matrix_empty(),
        drops=list(drops),
        analyzable=analyzable,
        applicants_last_month=float(np.nansum(recent)) if np.any(~np.isnan(recent)) else float("nan"),
        total_alerts=int(sum(s.alert_level for s in per.values())),
        alerts_last_week=int(last_week),
        trend_sign=trend_sign(target.values),
    )


def lagged_correlation_matrix_empty() -> pd.DataFrame:
    return pd.DataFrame(columns=["lag", "r_unshifted", "r_shifted", "n_unshifted", "n_shifted"]).rename_axis("series")


def run_early_warning(panel: Panel, cfg: EarlyWarningConfig, origin: str | None = None) -> EarlyWarningReport:
    """Filter, scan, lead-lag test and summarise one panel.

    Only the trailing ``back_w`` months are analysed. Lead-lag relations are
    estimated for every retained covariate against the target; only those
    significant at ``llag_thr`` enter the lag matrix.
    """
    panel = panel.tail(months_to_weeks(cfg.back_w))
    filt = filter_panel(panel, cfg)
    kept = filt.panel
    signals = {sid: series_signals(s, cfg) for sid, s in kept.series.items()}
    lag_matrix: dict[tuple[str, str], LagEstimate] = {}
    if filt.analyzable:
        y = kept.target
        for cid in kept.covariate_ids:
            try:
                est = lead_lag_ratio(kept.series[cid], y, cfg)
            except ValueError as exc:
                logger.debug("lead-lag skipped for %s: %s", cid, exc)
                continue
            if est.p_value < cfg.llag_thr:
                lag_matrix[(cid, y.id)] = est
    lags = {x: est.theta_hat for (x, _), est in lag_matrix.items()}
    corr = lagged_correlation_matrix(kept, lags) if lags else lagged_correlation_matrix_empty()
    return alert_summary(
        signals,
        kept.target,
        cfg,
        lag_matrix=lag_matrix,
        lagged_correlations=corr,
        origin=origin,
        drops=filt.drops,
        analyzable=filt.analyzable,
    )
