"""Synthetic panels and data bundles with planted structure.

Generator algorithm (enough to reproduce the output byte for byte):

* One ``numpy.random.Generator(PCG64(seed))`` drives everything.
* Let ``L`` be the largest planted lag and ``n = weeks + L``. Covariates
  are drawn in the listed order, each consuming exactly one
  ``standard_normal(n)`` call, ``z``:

  - ``ar1``: ``x[0] = mu + sd / sqrt(1 - phi**2) * z[0]`` and
    ``x[t] = mu + phi * (x[t-1] - mu) + sd * z[t]``;
  - ``step``: ``before + sd * z[t]`` for ``t < L + at``, else
    ``after + sd * z[t]``;
  - ``constant``: ``value`` (``z`` is drawn and discarded).

  After drawing, a series with ``clip`` set is clipped to ``[lo, hi]``
  and every covariate is rounded to 6 decimals.
* The target uses one more ``standard_normal(weeks)`` call ``e``:
  ``y[t] = intercept + sum(coef * x[L + t - lag]) + noise_sd * e[t]``,
  floored at 0 and rounded half-to-even to an integer.
* The emitted covariates are ``x[L:]``; week 0 is ``start``.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .events import default_weight_table
from .timeseries import Panel, WeekIndex, WeeklySeries

PROCESSES = ("ar1", "step", "constant")


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    process: str = "ar1"
    mu: float = 0.0
    phi: float = 0.5
    sd: float = 1.0
    before: float = 0.0
    after: float = 0.0
    at: int = 0
    value: float = 0.0
    clip: tuple[float, float] | None = None
    kind: str = ""


@dataclass(frozen=True)
class Link:
    covariate: str
    lag: int
    coef: float


@dataclass(frozen=True)
class SynthSpec:
    weeks: int
    covariates: tuple[CovariateSpec, ...]
    links: tuple[Link, ...] = ()
    intercept: float = 0.0
    noise_sd: float = 1.0
    seed: int = 0
    start: WeekIndex = WeekIndex(2015, 1)
    target_id: str = "applications"

    def __post_init__(self):
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ValueError("duplicate covariate names")
        if self.target_id in names:
            raise ValueError("target id collides with a covariate")
        for c in self.covariates:
            if c.process not in PROCESSES:
                raise ValueError(f"unknown process {c.process!r}")
            if c.process == "ar1" and not abs(c.phi) < 1:
                raise ValueError(f"{c.name}: |phi| must be < 1")
            if c.sd < 0:
                raise ValueError(f"{c.name}: sd must be >= 0")
        for ln in self.links:
            if ln.covariate not in names:
                raise ValueError(f"link to unknown covariate {ln.covariate!r}")
            if ln.lag < 0:
                raise ValueError("lags must be >= 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.weeks <= self.max_lag + 60:
            raise ValueError("weeks must exceed the largest lag by more than 60")

    @property
    def max_lag(self) -> int:
        return max((ln.lag for ln in self.links), default=0)


@dataclass
class GroundTruth:
    links: tuple[Link, ...]
    change_points: dict[str, WeekIndex]
    intercept: float
    seed: int


def _draw(c: CovariateSpec, z: np.ndarray, L: int) -> np.ndarray:
    n = z.size
    if c.process == "ar1":
        x = np.empty(n)
        x[0] = c.mu + c.sd / math.sqrt(1.0 - c.phi**2) * z[0]
        for t in range(1, n):
            x[t] = c.mu + c.phi * (x[t - 1] - c.mu) + c.sd * z[t]
    elif c.process == "step":
        level = np.where(np.arange(n) < L + c.at, c.before, c.after)
        x = level + c.sd * z
    else:
        x = np.full(n, float(c.value))
    if c.clip is not None:
        x = np.clip(x, c.clip[0], c.clip[1])
    return np.round(x, 6)


def generate(spec: SynthSpec) -> tuple[Panel, GroundTruth]:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    L = spec.max_lag
    n = spec.weeks + L
    full = {}
    for c in spec.covariates:
        full[c.name] = _draw(c, rng.standard_normal(n), L)
    e = rng.standard_normal(spec.weeks)
    y = np.full(spec.weeks, float(spec.intercept))
    for ln in spec.links:
        y += ln.coef * full[ln.covariate][L - ln.lag : L - ln.lag + spec.weeks]
    y = np.rint(np.maximum(y + spec.noise_sd * e, 0.0))
    series = {spec.target_id: WeeklySeries(spec.target_id, spec.start, y, kind="applications")}
    for c in spec.covariates:
        series[c.name] = WeeklySeries(c.name, spec.start, full[c.name][L:], kind=c.kind)
    cps = {c.name: spec.start + c.at for c in spec.covariates if c.process == "step"}
    return Panel(series, spec.target_id), GroundTruth(spec.links, cps, spec.intercept, spec.seed)


def planted_lead_spec(seed: int, weeks: int = 170, lag: int = 4, n_noise: int = 3, noise_sd: float = 60.0) -> SynthSpec:
    """One strongly autocorrelated driver leading the target by ``lag``
    weeks plus ``n_noise`` unrelated AR(1) covariates."""
    covs = [CovariateSpec("driver", "ar1", mu=50.0, phi=0.9, sd=8.0, clip=(0.0, 100.0), kind="trends")]
    covs += [CovariateSpec(f"noise{i}", "ar1", mu=50.0, phi=0.5, sd=8.0, clip=(0.0, 100.0), kind="trends") for i in range(n_noise)]
    return SynthSpec(weeks, tuple(covs), (Link("driver", lag, 20.0),), intercept=100.0, noise_sd=noise_sd, seed=seed)


# -- bundle generation ----------------------------------------------------------


@dataclass(frozen=True)
class BundleSpec:
    origins: tuple[str, ...] = ("AA", "BB")
    destinations: tuple[str, ...] = ("XX", "YY")
    weeks: int = 170
    start: WeekIndex = WeekIndex(2016, 1)
    topics: tuple[str, ...] = ("Refugee", "Passport", "Travel", "Turkey")
    routes: tuple[str, ...] = ("Eastern Mediterranean", "Central Mediterranean")
    lead_topic: str = "Refugee"
    lag: int = 4
    noise_sd: float = 40.0
    events_per_week: float = 20.0
    seed: int = 0


def generate_bundle(spec: BundleSpec, out_dir) -> dict[str, Path]:
    """Write the five CSV inputs for a synthetic multi-dyad dataset.

    Each origin's ``lead_topic`` search volume drives every one of its dyads
    ``lag`` weeks later. Events, crossings and decisions are noise. Files
    are written in a fixed order from one PCG64 stream seeded with ``seed``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    W, L = spec.weeks, spec.lag
    weeks = [spec.start + t for t in range(W)]
    trends: dict[tuple[str, str], np.ndarray] = {}
    for o in spec.origins:
        for topic in spec.topics:
            phi = 0.9 if topic == spec.lead_topic else 0.5
            c = CovariateSpec(topic, "ar1", mu=50.0, phi=phi, sd=8.0, clip=(0.0, 100.0))
            trends[(o, topic)] = np.round(_draw(c, rng.standard_normal(W + L), L), 2)
    apps = {}
    for o in spec.origins:
        drv = trends[(o, spec.lead_topic)]
        for d in spec.destinations:
            base = rng.uniform(200.0, 600.0)
            coef = rng.uniform(10.0, 25.0)
            y = base + coef * drv[:W] + spec.noise_sd * rng.standard_normal(W)
            apps[(o, d)] = np.rint(np.maximum(y, 0.0)).astype(int)
    paths = {}
    paths["applications"] = out / "applications.csv"
    with open(paths["applications"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week", "origin", "destination", "count"])
        for t, wk in enumerate(weeks):
            for (o, d), y in apps.items():
                w.writerow([str(wk), o, d, int(y[t])])
    paths["trends"] = out / "trends.csv"
    with open(paths["trends"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week", "country", "topic", "volume"])
        for t, wk in enumerate(weeks):
            for (o, topic), x in trends.items():
                w.writerow([str(wk), o, topic, f"{x[L + t]:.2f}"])
    codes = default_weight_table().included_codes()
    paths["events"] = out / "events.csv"
    first_day = spec.start.monday()
    with open(paths["events"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "country", "code", "is_root", "source_key"])
        key = 0
        for day in range(W * 7):
            date = first_day + dt.timedelta(days=day)
            for o in spec.origins:
                for _ in range(int(rng.poisson(spec.events_per_week / 7.0))):
                    code = codes[int(rng.integers(len(codes)))]
                    w.writerow([date.isoformat(), o, code, "1", f"k{key}"])
                    key += 1
    months = _months_covering(weeks[0], weeks[-1])
    paths["ibc"] = out / "ibc.csv"
    with open(paths["ibc"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "route", "origin", "count"])
        for (y, m) in months:
            for route in spec.routes:
                for o in spec.origins:
                    w.writerow([f"{y:04d}-{m:02d}", route, o, int(rng.poisson(800))])
    paths["decisions"] = out / "decisions.csv"
    with open(paths["decisions"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "origin", "destination", "positive", "total"])
        for (y, m) in months:
            for o in spec.origins:
                for d in spec.destinations:
                    total = int(rng.poisson(1000))
                    w.writerow([f"{y:04d}-{m:02d}", o, d, int(rng.binomial(total, 0.4)), total])
    return paths


def _months_covering(first: WeekIndex, last: WeekIndex) -> list[tuple[int, int]]:
    a, b = first.monday(), last.monday() + dt.timedelta(days=6)
    out = []
    y, m = a.year, a.month
    while (y, m) <= (b.year, b.month):
        out.append((y, m))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return out


def write_panel_csv(panel: Panel, path) -> None:
    """Wide CSV: ``week`` then one column per series, 6-decimal values."""
    ids = [panel.target_id] + panel.covariate_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week"] + ids)
        for t, wk in enumerate(panel.weeks()):
            w.writerow([str(wk)] + [_fmt(panel.series[i].values[t]) for i in ids])


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else f"{v:.6f}"


def spec_from_mapping(raw: dict) -> SynthSpec:
    covs = tuple(
        CovariateSpec(**{**c, "clip": tuple(c["clip"]) if c.get("clip") else None}) for c in raw.get("covariates", ())
    )
    links = tuple(Link(**ln) for ln in raw.get("links", ()))
    start = raw.get("start")
    kw = {k: raw[k] for k in ("weeks", "intercept", "noise_sd", "seed", "target_id") if k in raw}
    if start:
        kw["start"] = WeekIndex.parse(str(start))
    return SynthSpec(covariates=covs, links=links, **kw)
