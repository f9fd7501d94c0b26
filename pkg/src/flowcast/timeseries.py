"""Week-indexed series, frequency alignment and basic statistics.

Every signal in the package is carried as a :class:`WeeklySeries`: a start
week plus a float array in which ``NaN`` marks a missing observation. Weeks
follow ISO-8601 (Monday-based, week 1 contains the first Thursday).
"""
from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

_WEEK_RE = re.compile(r"^(\d{4})-?W(\d{1,2})$")
_MONTH_RE = re.compile(r"^(\d{4})-(\d{1,2})$")


@dataclass(frozen=True, order=True)
class WeekIndex:
    """An ISO year/week pair with calendar-correct arithmetic."""

    iso_year: int
    iso_week: int

    def __post_init__(self):
        # fromisocalendar validates week 53 against the actual year
        dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)

    @classmethod
    def from_date(cls, day: dt.date) -> "WeekIndex":
        y, w, _ = day.isocalendar()
        return cls(y, w)

    @classmethod
    def parse(cls, text: str) -> "WeekIndex":
        """Parse ``YYYY-Www`` or an ISO calendar date ``YYYY-MM-DD``."""
        text = text.strip()
        m = _WEEK_RE.match(text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        return cls.from_date(dt.date.fromisoformat(text))

    def monday(self) -> dt.date:
        return dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)

    def __add__(self, weeks: int) -> "WeekIndex":
        return WeekIndex.from_date(self.monday() + dt.timedelta(weeks=int(weeks)))

    def __sub__(self, other):
        if isinstance(other, WeekIndex):
            return (self.monday() - other.monday()).days // 7
        return self + (-int(other))

    def __str__(self) -> str:
        return f"{self.iso_year}-W{self.iso_week:02d}"


def parse_month(text: str) -> tuple[int, int]:
    m = _MONTH_RE.match(text.strip())
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise ValueError(f"invalid month {text!r}, expected YYYY-MM")
    return int(m.group(1)), int(m.group(2))


def add_months(ym: tuple[int, int], k: int) -> tuple[int, int]:
    total = ym[0] * 12 + (ym[1] - 1) + k
    return total // 12, total % 12 + 1


def months_to_weeks(months: float) -> int:
    """Calendar months expressed as whole weeks (52 weeks per 12 months)."""
    return int(round(months * 52.0 / 12.0))


@dataclass(frozen=True, eq=False)
class WeeklySeries:
    """A named series indexed by consecutive ISO weeks from ``start``.

    ``values`` is stored as a read-only float64 array; ``NaN`` is missing.
    ``kind`` optionally tags the data class (``applications``, ``ibc`` ...)
    used by threshold filtering.
    """

    id: str
    start: WeekIndex
    values: np.ndarray
    origin: str | None = None
    kind: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64).ravel()
        if arr.size < 1:
            raise ValueError("empty series")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> WeekIndex:
        return self.start + (len(self) - 1)

    @property
    def weeks(self) -> list[WeekIndex]:
        return [self.start + i for i in range(len(self))]

    def __eq__(self, other):
        if not isinstance(other, WeeklySeries):
            return NotImplemented
        return (
            self.id == other.id
            and self.start == other.start
            and self.origin == other.origin
            and self.kind == other.kind
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def replace(self, **changes) -> "WeeklySeries":
        fields = dict(id=self.id, start=self.start, values=self.values, origin=self.origin, kind=self.kind)
        fields.update(changes)
        return WeeklySeries(**fields)

    def observed(self) -> np.ndarray:
        return self.values[~np.isnan(self.values)]

    def missing_fraction(self) -> float:
        return float(np.isnan(self.values).mean())

    def value_at(self, week: WeekIndex) -> float:
        i = week - self.start
        if 0 <= i < len(self):
            return float(self.values[i])
        return float("nan")

    def window(self, first: WeekIndex, last: WeekIndex) -> "WeeklySeries":
        """Re-index onto ``[first, last]``, padding with missing."""
        n = (last - first) + 1
        if n < 1:
            raise ValueError("empty week range")
        out = np.full(n, np.nan)
        off = self.start - first
        lo, hi = max(0, off), min(n, off + len(self))
        if lo < hi:
            out[lo:hi] = self.values[lo - off : hi - off]
        return self.replace(start=first, values=out)

    def truncate(self, last: WeekIndex) -> "WeeklySeries":
        """Drop every observation after ``last``."""
        n = (last - self.start) + 1
        if n < 1:
            raise ValueError("truncation leaves an empty series")
        return self.replace(values=self.values[:n])

    def tail(self, n: int) -> "WeeklySeries":
        n = min(n, len(self))
        return self.replace(start=self.start + (len(self) - n), values=self.values[-n:])

    def shift(self, k: int) -> "WeeklySeries":
        """Move the series ``k`` weeks later in time (same values, new start)."""
        return self.replace(start=self.start + k)


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    id: str
    start: tuple[int, int]
    values: np.ndarray
    origin: str | None = None
    kind: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64).ravel()
        if arr.size < 1:
            raise ValueError("empty series")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        add_months(self.start, 0)

    def months(self) -> list[tuple[int, int]]:
        return [add_months(self.start, i) for i in range(self.values.size)]


@dataclass(frozen=True, eq=False)
class Panel:
    """Series sharing one aligned week range, with a designated target."""

    series: dict[str, WeeklySeries]
    target_id: str
    start: WeekIndex = field(init=False)
    n_weeks: int = field(init=False)

    def __post_init__(self):
        if not self.series:
            raise ValueError("empty panel")
        if self.target_id not in self.series:
            raise KeyError(f"target {self.target_id!r} not in panel")
        first = next(iter(self.series.values()))
        for s in self.series.values():
            if s.start != first.start or len(s) != len(first):
                raise ValueError(f"series {s.id!r} is not aligned with the panel")
        object.__setattr__(self, "series", dict(self.series))
        object.__setattr__(self, "start", first.start)
        object.__setattr__(self, "n_weeks", len(first))

    def __eq__(self, other):
        if not isinstance(other, Panel):
            return NotImplemented
        return (
            self.target_id == other.target_id
            and list(self.series) == list(other.series)
            and all(self.series[k] == other.series[k] for k in self.series)
        )

    @property
    def end(self) -> WeekIndex:
        return self.start + (self.n_weeks - 1)

    @property
    def target(self) -> WeeklySeries:
        return self.series[self.target_id]

    @property
    def covariate_ids(self) -> list[str]:
        return [k for k in self.series if k != self.target_id]

    def weeks(self) -> list[WeekIndex]:
        return [self.start + i for i in range(self.n_weeks)]

    def matrix(self, ids: Sequence[str] | None = None) -> np.ndarray:
        ids = list(self.series) if ids is None else list(ids)
        return np.column_stack([self.series[k].values for k in ids])

    def subset(self, ids: Iterable[str]) -> "Panel":
        keep = set(ids) | {self.target_id}
        return Panel({k: v for k, v in self.series.items() if k in keep}, self.target_id)

    def truncate(self, last: WeekIndex) -> "Panel":
        return Panel({k: v.truncate(last) for k, v in self.series.items()}, self.target_id)

    def tail(self, n: int) -> "Panel":
        return Panel({k: v.tail(n) for k, v in self.series.items()}, self.target_id)


def aggregate_daily_to_weekly(daily: Iterable[tuple[dt.date, float]], id: str = "", origin=None) -> WeeklySeries:
    """Sum daily observations into ISO weeks; weeks without days are missing."""
    totals: dict[WeekIndex, float] = {}
    for day, value in daily:
        wk = WeekIndex.from_date(day)
        totals[wk] = totals.get(wk, 0.0) + float(value)
    if not totals:
        raise ValueError("empty series")
    first, last = min(totals), max(totals)
    out = np.full((last - first) + 1, np.nan)
    for wk, v in totals.items():
        out[wk - first] = v
    return WeeklySeries(id, first, out, origin=origin)


def interpolate_monthly_to_weekly(m: MonthlySeries) -> WeeklySeries:
    """Linear interpolation between mid-month anchors.

    Each observed month is pinned to the ISO week containing its 15th. The
    output spans the weeks containing the first day of the first month
    through the last day of the last month; weeks outside the anchors repeat
    the nearest anchor value.
    """
    months = m.months()
    anchors = [
        (WeekIndex.from_date(dt.date(y, mo, 15)), v) for (y, mo), v in zip(months, m.values) if not np.isnan(v)
    ]
    if len(anchors) < 2:
        raise ValueError("insufficient anchors")
    first = WeekIndex.from_date(dt.date(months[0][0], months[0][1], 1))
    ny, nm = add_months(months[-1], 1)
    last = WeekIndex.from_date(dt.date(ny, nm, 1) - dt.timedelta(days=1))
    n = (last - first) + 1
    xp = np.array([wk - first for wk, _ in anchors], dtype=np.float64)
    fp = np.array([v for _, v in anchors], dtype=np.float64)
    out = np.interp(np.arange(n, dtype=np.float64), xp, fp)
    return WeeklySeries(m.id, first, out, origin=m.origin, kind=m.kind)


def trailing_mean(values: np.ndarray, window: int) -> np.ndarray:
    """Mean of the non-missing values among the last ``window`` positions."""
    if window < 1:
        raise ValueError("window_weeks must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    # windowed sums rather than a running cumsum: no cancellation error
    padded = np.concatenate([np.full(window - 1, np.nan), v])
    win = np.lib.stride_tricks.sliding_window_view(padded, window)
    ok = ~np.isnan(win)
    cnt = ok.sum(axis=1)
    tot = np.where(ok, win, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)
    return out


def moving_average(s: WeeklySeries, window_weeks: int) -> WeeklySeries:
    return s.replace(id=f"{s.id}.ma{window_weeks}", values=trailing_mean(s.values, window_weeks))


def coefficient_of_variation(s: WeeklySeries | np.ndarray) -> float:
    """Sample standard deviation over absolute mean, ignoring missing."""
    v = s.observed() if isinstance(s, WeeklySeries) else np.asarray(s, dtype=float)
    v = v[~np.isnan(v)]
    if v.size < 2:
        raise ValueError("coefficient of variation needs at least 2 values")
    mean = v.mean()
    if mean == 0:
        raise ValueError("undefined cv")
    return float(v.std(ddof=1) / abs(mean))


def align(
    series: Iterable[WeeklySeries] | Mapping[str, WeeklySeries],
    span: tuple[WeekIndex, WeekIndex] | None = None,
    target_id: str | None = None,
    how: str = "union",
) -> Panel:
    """Re-index series onto a common week range.

    ``span`` fixes the range explicitly; otherwise ``how`` selects the union
    or the intersection of the member ranges.
    """
    items = list(series.values()) if isinstance(series, Mapping) else list(series)
    if not items:
        raise ValueError("empty panel")
    if span is None:
        if how == "union":
            span = (min(s.start for s in items), max(s.end for s in items))
        elif how == "intersection":
            span = (max(s.start for s in items), min(s.end for s in items))
        else:
            raise ValueError(f"unknown alignment {how!r}")
    first, last = span
    if last < first:
        raise ValueError("empty week range")
    aligned = {s.id: s.window(first, last) for s in items}
    return Panel(aligned, target_id if target_id is not None else items[0].id)
