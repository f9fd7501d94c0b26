import dataclasses
import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowcast.backtest import (
    BacktestRow,
    StepForecast,
    as_of_weeks,
    confidence_band,
    error_stats,
    relative_error,
    run_backtest,
    traffic_light,
)
from flowcast.config import BacktestConfig, RunConfig
from flowcast.synth import generate, planted_lead_spec
from flowcast.timeseries import Panel, WeekIndex, WeeklySeries, moving_average

START = WeekIndex(2016, 1)


def make_panel(n=120, seed=0):
    rng = np.random.default_rng(seed)
    x = 50 + 4 * rng.normal(size=n).cumsum()
    y = np.maximum(0, 300 + 5 * x + 10 * rng.normal(size=n))
    return Panel(
        {
            "applications": WeeklySeries("applications", START, y, kind="applications"),
            "x": WeeklySeries("x", START, x),
        },
        "applications",
    )


def cfg_for(panel, start_offset=60, final_offset=None, **fc):
    bt = BacktestConfig(
        start_date=(panel.start + start_offset).monday(),
        final_date=(panel.start + final_offset).monday() if final_offset is not None else None,
    )
    base = RunConfig()
    return RunConfig(fc=dataclasses.replace(base.fc, **fc), bt=bt)


def naive_model(panel, cfg):
    """Repeat the mean of the last four weeks."""
    level = float(np.nanmean(panel.target.values[-4:]))
    return StepForecast(np.full(cfg.fc.n_ahead, level), np.full(cfg.fc.n_ahead, level * 0.9))


def test_oracle_model_zero_error():
    p = make_panel()
    full = p.target.values

    def oracle(sub, cfg):
        i = sub.n_weeks
        fut = full[i : i + cfg.fc.n_ahead]
        fut = np.r_[fut, np.full(cfg.fc.n_ahead - fut.size, np.nan)]
        return StepForecast(fut, fut)

    res = run_backtest(p, cfg_for(p), oracle)
    s = res.summary
    assert s["n_weeks"] == len(res.rows) > 0
    for who in ("model", "benchmark"):
        assert s[who]["abs"]["max"] == 0 and s[who]["rel"]["max"] == 0
    assert res.traffic == "very good"


def test_model_sees_nothing_after_as_of():
    p = make_panel()
    seen = []

    def spy(sub, cfg):
        seen.append(sub.end)
        return naive_model(sub, cfg)

    res = run_backtest(p, cfg_for(p), spy)
    assert seen == [r.as_of for r in res.rows]


def test_perturbing_the_future_changes_nothing():
    p = make_panel(100)
    cfg = cfg_for(p, start_offset=70, final_offset=78)
    base = run_backtest(p, cfg)
    assert all(r.status == "ok" for r in base.rows)
    w = base.rows[1].as_of
    cut = (w - p.start) + 1
    bumped = {sid: s.replace(values=np.r_[s.values[:cut], s.values[cut:] * 3 + 7]) for sid, s in p.series.items()}
    other = run_backtest(Panel(bumped, "applications"), cfg)
    for a, b in zip(base.rows[:2], other.rows[:2]):
        assert a.forecast == b.forecast and a.benchmark == b.benchmark and a.lam == b.lam
    assert base.rows[-1].forecast != other.rows[-1].forecast


@given(st.integers(0, 20))
def test_later_start_is_suffix(k):
    p = make_panel()
    full = run_backtest(p, cfg_for(p), naive_model)
    later = run_backtest(p, cfg_for(p, start_offset=60 + k), naive_model)
    assert later.rows == full.rows[k:]


def test_pipeline_later_start_is_suffix():
    p = make_panel(90)
    a = run_backtest(p, cfg_for(p, start_offset=70, final_offset=77))
    b = run_backtest(p, cfg_for(p, start_offset=72, final_offset=77))
    strip = lambda r: (r.as_of, r.forecast, r.benchmark, r.actual, r.lam, r.active)
    assert [strip(r) for r in b.rows] == [strip(r) for r in a.rows[2:]]


def test_insufficient_history():
    p = make_panel()
    with pytest.raises(ValueError, match="insufficient"):
        run_backtest(p, cfg_for(p, start_offset=30), naive_model)


def test_as_of_span():
    p = make_panel()
    weeks = as_of_weeks(p, cfg_for(p))
    assert weeks[0] == p.start + 60 and weeks[-1] == p.end - 4


def test_single_as_of_week():
    p = make_panel()
    res = run_backtest(p, cfg_for(p, start_offset=100, final_offset=104), naive_model)
    assert len(res.rows) == 1
    assert res.summary["model"]["rel"]["sd"] == 0.0


def _row(f, b, a):
    return BacktestRow(WeekIndex(2018, 1), f, b, a)


def test_single_week_error_stats():
    s = error_stats([_row(3445, 2826, 3424)])
    assert s["model"]["rel"]["mean"] == pytest.approx(0.613, abs=1e-3)
    assert s["model"]["abs"]["mean"] == 21
    assert round(s["benchmark"]["rel"]["mean"], 1) == -17.5
    assert s["benchmark"]["abs"]["mean"] == 598


def test_symmetric_errors():
    s = error_stats([_row(110, 100, 100), _row(90, 100, 100)])
    assert s["model"]["rel"]["mean"] == 0 and s["model"]["abs"]["mean"] == 10


def test_zero_actual_kept_for_absolute_only():
    s = error_stats([_row(5, 4, 0), _row(110, 100, 100)])
    assert s["n_weeks"] == 2 and s["n_rel_weeks"] == 1
    assert s["model"]["abs"]["mean"] == 7.5 and s["model"]["rel"]["mean"] == pytest.approx(10)
    assert np.isnan(relative_error(5, 0))


def test_identical_weeks_for_model_and_benchmark():
    s = error_stats([_row(110, np.nan, 100), _row(90, 95, 100), _row(80, 85, np.nan)])
    assert s["n_weeks"] == 1
    assert s["model"]["abs"]["mean"] == 10 and s["benchmark"]["abs"]["mean"] == 5


@pytest.mark.parametrize(
    "rel,abs_,cls",
    [(7, 113, "very good"), (15.6, 8, "very good"), (26.9, 134, "very poor"), (-7, -113, "very good"),
     (15, 15, "good"), (15, 30, "poor"), (15, 40, "poor"), (15, 41, "very poor")],
)
def test_traffic_light_examples(rel, abs_, cls):
    assert traffic_light(rel, abs_) == cls


@given(st.floats(0, 200), st.floats(0, 500), st.floats(0, 1), st.floats(0, 1))
def test_traffic_light_monotone(r, a, fr, fa):
    order = {"very good": 0, "good": 1, "poor": 2, "very poor": 3}
    assert order[traffic_light(r * fr, a * fa)] <= order[traffic_light(r, a)]


def test_band_constant():
    c, lo, hi = confidence_band(WeeklySeries("x", START, np.full(30, 8.0)), 6)
    assert np.allclose(c[5:], 8) and np.allclose(lo[5:], 8) and np.allclose(hi[5:], 8)


def test_band_center_is_moving_average():
    s = WeeklySeries("x", START, np.random.default_rng(0).normal(size=50))
    c, _, _ = confidence_band(s, 8)
    assert np.array_equal(c, moving_average(s, 8).values, equal_nan=True)


@pytest.mark.parametrize("w,lo_cov,hi_cov", [(12, 0.90, 0.96), (52, 0.93, 0.97)])
def test_band_coverage_iid(w, lo_cov, hi_cov):
    # the band targets the moving average's standard error, so the true mean
    # sits inside it close to 95% of the time once windows are full; small
    # windows undercover slightly because the sd is estimated
    rng = np.random.default_rng(1)
    mu = 5.0
    hits = total = 0
    for _ in range(300):
        s = WeeklySeries("x", START, mu + rng.normal(size=4 * w))
        _, lo, hi = confidence_band(s, w)
        lo, hi = lo[2 * w :], hi[2 * w :]
        hits += np.sum((lo <= mu) & (mu <= hi))
        total += lo.size
    assert lo_cov <= hits / total <= hi_cov


def test_band_window_too_small():
    with pytest.raises(ValueError):
        confidence_band(WeeklySeries("x", START, np.ones(10)), 3)


@pytest.mark.slow
def test_planted_lead_beats_benchmark():
    spec = planted_lead_spec(seed=3)
    p, _ = generate(spec)
    cfg = RunConfig(bt=BacktestConfig(start_date=(spec.start + 60).monday()))
    res = run_backtest(p, cfg)
    m, b = res.summary["model"]["abs"]["mean"], res.summary["benchmark"]["abs"]["mean"]
    assert m < b
