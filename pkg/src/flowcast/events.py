"""Weighted event indices per origin country.

Each included event code carries a sign and a strength 1..4; one event adds
``sign * strength / 3`` to the weekly index of its macro-category.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .timeseries import WeekIndex, WeeklySeries

logger = logging.getLogger(__name__)

CATEGORIES = ("Conflict", "Governance", "Political", "Social", "Economic")
INDEX_NAMES = {
    "Conflict": "JwConflict",
    "Governance": "JwGovernance",
    "Political": "JwPolitical",
    "Social": "JwSocial",
    "Economic": "JwEconomy",
}


@dataclass(frozen=True)
class EventRecord:
    date: dt.date
    country: str
    code: str
    is_root: bool
    source_key: str

    def __post_init__(self):
        if not self.source_key:
            raise ValueError("source_key must be nonempty")


@dataclass(frozen=True)
class EventWeight:
    included: bool
    sign: int = 0
    category: str = ""
    strength: int = 0
    topic: str = ""

    @property
    def weight(self) -> float:
        return self.sign * self.strength / 3.0 if self.included else 0.0


class EventWeightTable:
    """Mapping from event code to (included, sign, category, strength)."""

    def __init__(self, entries: Mapping[str, EventWeight]):
        for code, e in entries.items():
            if not e.included:
                continue
            if e.sign not in (1, -1):
                raise ValueError(f"code {code}: sign must be +1 or -1")
            if e.strength not in (1, 2, 3, 4):
                raise ValueError(f"code {code}: strength must be in 1..4")
            if e.category not in CATEGORIES:
                raise ValueError(f"code {code}: unknown category {e.category!r}")
        self.entries = dict(entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, code):
        return code in self.entries

    def __getitem__(self, code) -> EventWeight:
        return self.entries[code]

    def included_codes(self) -> list[str]:
        return [c for c, e in self.entries.items() if e.included]

    @classmethod
    def read_csv(cls, source) -> "EventWeightTable":
        """Load from a path or an open text stream with header
        ``code,included,sign,category,strength[,topic]``."""
        if isinstance(source, (str, Path)):
            with open(source, newline="", encoding="utf-8") as fh:
                return cls._parse(fh, str(source))
        return cls._parse(source, "<stream>")

    @classmethod
    def _parse(cls, fh, name) -> "EventWeightTable":
        reader = csv.DictReader(fh)
        missing = {"code", "included", "sign", "category", "strength"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{name}: missing columns {sorted(missing)}")
        entries = {}
        for row in reader:
            line = reader.line_num
            code = row["code"].strip()
            if code in entries:
                raise ValueError(f"{name}:{line}: duplicate code {code}")
            included = row["included"].strip().lower() in ("yes", "true", "1", "y")
            try:
                if included:
                    entries[code] = EventWeight(
                        True,
                        int(row["sign"].replace("+", "")),
                        row["category"].strip(),
                        int(row["strength"]),
                        (row.get("topic") or "").strip(),
                    )
                else:
                    entries[code] = EventWeight(False, topic=(row.get("topic") or "").strip())
            except ValueError as exc:
                raise ValueError(f"{name}:{line}: {exc}") from None
        try:
            return cls(entries)
        except ValueError as exc:
            raise ValueError(f"{name}: {exc}") from None

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["code", "included", "sign", "category", "strength", "topic"])
            for code, e in self.entries.items():
                if e.included:
                    w.writerow([code, "yes", f"{e.sign:+d}", e.category, e.strength, e.topic])
                else:
                    w.writerow([code, "no", "", "", "", e.topic])


def default_weight_table() -> EventWeightTable:
    """The shipped CAMEO selection and weighting table."""
    text = resources.files("flowcast").joinpath("data/cameo_weights.csv").read_text(encoding="utf-8")
    return EventWeightTable._parse(io.StringIO(text), "cameo_weights.csv")


def dedupe_events(records: Iterable[EventRecord]) -> list[EventRecord]:
    """Keep root events only, then the earliest record per ``source_key``."""
    best: dict[str, EventRecord] = {}
    for r in records:
        if not r.is_root:
            continue
        cur = best.get(r.source_key)
        if cur is None or r.date < cur.date:
            best[r.source_key] = r
    return sorted(best.values(), key=lambda r: (r.date, r.country, r.source_key))


@dataclass
class EventIndexSet:
    """Five weekly macro-category indices per country, on one week range."""

    start: WeekIndex
    n_weeks: int
    indices: dict[str, dict[str, WeeklySeries]]

    def countries(self) -> list[str]:
        return sorted(self.indices)

    def __getitem__(self, country) -> dict[str, WeeklySeries]:
        return self.indices[country]


def compute_indices(
    records: Iterable[EventRecord],
    table: EventWeightTable | None = None,
    span: tuple[WeekIndex, WeekIndex] | None = None,
    countries: Iterable[str] | None = None,
) -> EventIndexSet:
    """Sum signed, strength-scaled weights per country, week and category.

    Weeks without events hold 0. Codes absent from the table are skipped with
    a warning; excluded codes contribute nothing.
    """
    table = table or default_weight_table()
    records = list(records)
    if span is None:
        if not records:
            raise ValueError("no events and no week range given")
        weeks = [WeekIndex.from_date(r.date) for r in records]
        span = (min(weeks), max(weeks))
    first, last = span
    n = (last - first) + 1
    if n < 1:
        raise ValueError("empty week range")
    names = set(countries or ()) | {r.country for r in records}
    acc = {c: {cat: np.zeros(n) for cat in CATEGORIES} for c in names}
    unknown: dict[str, int] = {}
    # signed strengths are summed as integers and scaled once, so sums are exact
    for r in records:
        entry = table.entries.get(r.code)
        if entry is None:
            unknown[r.code] = unknown.get(r.code, 0) + 1
            continue
        if not entry.included:
            continue
        i = WeekIndex.from_date(r.date) - first
        if 0 <= i < n:
            acc[r.country][entry.category][i] += entry.sign * entry.strength
    for code, k in sorted(unknown.items()):
        logger.warning("unknown event code %s skipped (%d records)", code, k)
    indices = {
        c: {
            INDEX_NAMES[cat]: WeeklySeries(INDEX_NAMES[cat], first, acc[c][cat] / 3.0, origin=c, kind="events")
            for cat in CATEGORIES
        }
        for c in sorted(names)
    }
    return EventIndexSet(first, n, indices)


def push_factor_index(idx: EventIndexSet, country: str) -> WeeklySeries:
    """Week-by-week sum of the five macro-category indices."""
    parts = idx[country]
    total = np.sum([parts[INDEX_NAMES[c]].values for c in CATEGORIES], axis=0)
    return WeeklySeries("PFI", idx.start, total, origin=country, kind="events")
