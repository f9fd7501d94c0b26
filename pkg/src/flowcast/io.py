"""CSV ingestion of the five input tiers and per-dyad panel assembly."""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
import pandas as pd

from .events import EventRecord, compute_indices, dedupe_events
from .timeseries import (
    MonthlySeries,
    Panel,
    WeekIndex,
    WeeklySeries,
    align,
    interpolate_monthly_to_weekly,
    parse_month,
)

logger = logging.getLogger(__name__)

TARGET_ID = "applications"


class InputError(ValueError):
    """Malformed or inconsistent input data."""


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError(f"negative count {v}")
    return v


def _week(text: str) -> str:
    return str(WeekIndex.parse(text.strip()))


def _month(text: str) -> str:
    y, m = parse_month(text.strip())
    return f"{y:04d}-{m:02d}"


def _date(text: str) -> str:
    return dt.date.fromisoformat(text.strip()).isoformat()


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _volume(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 100.0:
        raise ValueError(f"volume {v} outside [0, 100]")
    return v


def _text(text: str) -> str:
    t = text.strip()
    if not t:
        raise ValueError("empty field")
    return t


SCHEMAS: dict[str, list[tuple[str, Callable]]] = {
    "applications": [("week", _week), ("origin", _text), ("destination", _text), ("count", _nonneg_int)],
    "decisions": [("month", _month), ("origin", _text), ("destination", _text), ("positive", _nonneg_int), ("total", _nonneg_int)],
    "ibc": [("month", _month), ("route", _text), ("origin", _text), ("count", _nonneg_int)],
    "events": [("date", _date), ("country", _text), ("code", _text), ("is_root", _bool), ("source_key", _text)],
    "trends": [("week", _week), ("country", _text), ("topic", _text), ("volume", _volume)],
}


def read_table(path, kind: str) -> pd.DataFrame:
    """Parse one input CSV, reporting the first bad row as ``file:line``."""
    schema = SCHEMAS[kind]
    cols = [c for c, _ in schema]
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return pd.DataFrame({c: [] for c in cols})
        header = [h.strip() for h in header]
        missing = [c for c in cols if c not in header]
        if missing:
            raise InputError(f"{path}:1: missing columns {missing}")
        pos = [header.index(c) for c in cols]
        for rec in reader:
            if not rec or all(not f.strip() for f in rec):
                continue
            line = reader.line_num
            if len(rec) < len(header):
                raise InputError(f"{path}:{line}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([parse(rec[i]) for (_, parse), i in zip(schema, pos)])
            except ValueError as exc:
                raise InputError(f"{path}:{line}: {exc}") from None
    df = pd.DataFrame(rows, columns=cols)
    if kind == "decisions" and len(df) and (df["positive"] > df["total"]).any():
        bad = int(np.flatnonzero((df["positive"] > df["total"]).to_numpy())[0])
        raise InputError(f"{path}:{bad + 2}: positive exceeds total")
    return df


def write_table(df: pd.DataFrame, path, kind: str) -> None:
    cols = [c for c, _ in SCHEMAS[kind]]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in df[cols].itertuples(index=False):
            w.writerow([_cell(v) for v in rec])


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class DatasetBundle:
    applications: pd.DataFrame
    decisions: pd.DataFrame | None = None
    ibc: pd.DataFrame | None = None
    events: pd.DataFrame | None = None
    trends: pd.DataFrame | None = None
    sources: dict[str, str] = field(default_factory=dict)

    TIERS = ("applications", "decisions", "ibc", "events", "trends")

    def __eq__(self, other):
        if not isinstance(other, DatasetBundle):
            return NotImplemented
        for t in self.TIERS:
            a, b = getattr(self, t), getattr(other, t)
            if (a is None) != (b is None):
                return False
            if a is not None and not a.reset_index(drop=True).equals(b.reset_index(drop=True)):
                return False
        return True

    def recognition_rate(self) -> pd.DataFrame:
        """Monthly positive/total; months with no decisions give NaN."""
        if self.decisions is None:
            return pd.DataFrame(columns=["month", "origin", "destination", "rate"])
        d = self.decisions
        zero = d["total"] == 0
        if zero.any():
            logger.warning("%d decision rows with total = 0; recognition rate missing", int(zero.sum()))
        rate = np.where(zero, np.nan, d["positive"] / d["total"].where(~zero, 1))
        return d[["month", "origin", "destination"]].assign(rate=rate)

    def dyads(self) -> list[tuple[str, str]]:
        pairs = self.applications[["origin", "destination"]].drop_duplicates()
        return sorted(map(tuple, pairs.to_numpy().tolist()))

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for t in self.TIERS:
            df = getattr(self, t)
            if df is not None:
                paths[t] = out / f"{t}.csv"
                write_table(df, paths[t], t)
        return paths


def ingest(paths: Mapping[str, str | Path] | str | Path) -> DatasetBundle:
    """Read a bundle from a directory of ``<tier>.csv`` files or a mapping
    from tier name to path. Only applications are required."""
    if isinstance(paths, (str, Path)):
        root = Path(paths)
        paths = {t: root / f"{t}.csv" for t in DatasetBundle.TIERS if (root / f"{t}.csv").exists()}
    unknown = set(paths) - set(DatasetBundle.TIERS)
    if unknown:
        raise InputError(f"unknown data tiers {sorted(unknown)}")
    if "applications" not in paths:
        raise InputError("no target data")
    tables = {}
    for t, p in paths.items():
        if not Path(p).exists():
            raise InputError(f"{p}: file not found")
        tables[t] = read_table(p, t)
    if tables["applications"].empty:
        raise InputError("no target data")
    return DatasetBundle(**tables, sources={t: str(p) for t, p in paths.items()})


# -- panel assembly -------------------------------------------------------------


def _weekly(df: pd.DataFrame, value: str, sid: str, kind: str, origin=None) -> WeeklySeries:
    wk = [WeekIndex.parse(w) for w in df["week"]]
    first, last = min(wk), max(wk)
    v = np.full((last - first) + 1, np.nan)
    for w, x in zip(wk, df[value].to_numpy(dtype=np.float64)):
        i = w - first
        v[i] = x if np.isnan(v[i]) else v[i] + x
    return WeeklySeries(sid, first, v, origin=origin, kind=kind)


def _monthly(df: pd.DataFrame, value: str, sid: str, kind: str, origin=None) -> WeeklySeries | None:
    g = df.groupby("month", sort=True)[value].sum(min_count=1)
    months = [parse_month(m) for m in g.index]
    if len(months) < 2:
        return None
    first = months[0]
    n = (months[-1][0] - first[0]) * 12 + months[-1][1] - first[1] + 1
    v = np.full(n, np.nan)
    for (y, m), x in zip(months, g.to_numpy(dtype=np.float64)):
        v[(y - first[0]) * 12 + m - first[1]] = x
    try:
        return interpolate_monthly_to_weekly(MonthlySeries(sid, first, v, origin=origin, kind=kind))
    except ValueError:
        return None


def dyad_panel(
    bundle: DatasetBundle,
    origin: str,
    destination: str | None = None,
    topics=None,
    as_of: WeekIndex | None = None,
) -> Panel:
    """Target plus every covariate tier for one origin/destination pair.

    Covariates: search volumes per topic (``trend.<topic>``), the five event
    indices of the origin, interpolated crossings per route
    (``ibc.<route>``), and the interpolated recognition rate and decision
    volume for the pair. The week range is that of the target. With no
    destination, applications and decisions are summed over destinations.
    """
    label = f"{origin}->{destination or '*'}"
    a = bundle.applications
    a = a[a["origin"] == origin]
    if destination is not None:
        a = a[a["destination"] == destination]
    if a.empty:
        raise InputError(f"no target data for {label}")
    target = _weekly(a, "count", TARGET_ID, "applications", origin)
    first, last = target.start, target.end
    if as_of is not None:
        if as_of < first:
            raise InputError(f"as-of week {as_of} precedes the data for {label}")
        last = min(last, as_of)
    series = [target]
    if bundle.trends is not None:
        tr = bundle.trends[bundle.trends["country"] == origin]
        wanted = list(topics) if topics else sorted(tr["topic"].unique())
        for topic in wanted:
            sub = tr[tr["topic"] == topic]
            if not sub.empty:
                series.append(_weekly(sub, "volume", f"trend.{topic}", "trends", origin))
    if bundle.events is not None:
        ev = bundle.events[bundle.events["country"] == origin]
        if not ev.empty:
            recs = [
                EventRecord(dt.date.fromisoformat(d), c, code, bool(r), k)
                for d, c, code, r, k in ev[["date", "country", "code", "is_root", "source_key"]].itertuples(index=False)
            ]
            idx = compute_indices(dedupe_events(recs), span=(first, last), countries=[origin])
            series.extend(idx[origin].values())
    if bundle.ibc is not None:
        ib = bundle.ibc[bundle.ibc["origin"] == origin]
        for route in sorted(ib["route"].unique()):
            s = _monthly(ib[ib["route"] == route], "count", f"ibc.{route}", "ibc", origin)
            if s is not None:
                series.append(s)
    if bundle.decisions is not None:
        d = bundle.decisions
        d = d[d["origin"] == origin]
        if destination is not None:
            d = d[d["destination"] == destination]
        if not d.empty:
            m = d.groupby("month", sort=True)[["positive", "total"]].sum().reset_index()
            zero = m["total"] == 0
            if zero.any():
                logger.warning("%s: %d months with no decisions; recognition rate missing", label, int(zero.sum()))
            m["rate"] = np.where(zero, np.nan, m["positive"] / m["total"].where(~zero, 1))
            for col, sid, kind in (("rate", "recognition_rate", ""), ("total", "decision.total", "decisions")):
                s = _monthly(m, col, sid, kind, origin)
                if s is not None:
                    series.append(s)
    return align(series, span=(first, last), target_id=TARGET_ID)

