"""Run configuration with the table parameter names as aliases.

Configuration files are flat ``key: value`` YAML. Keys may use either the
attribute name (``cv_thr``) or the dotted name (``cv.thr``).
"""
from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml


@dataclass(frozen=True)
class EarlyWarningConfig:
    cv_thr: float = 0.05
    ibc_thr: float = 100.0
    applicant_thr: float = 100.0
    pending_thr: float = 100.0
    decision_thr: float = 100.0
    na_thr: float = 0.3
    ma1: int = 6
    ma2: int = 24
    ma_thr: float = 1.1
    clean_w: int = 6
    alert_w: int = 12
    back_w: int = 24
    pvalue: float = 0.05
    llag_thr: float = 0.05
    delta_max: int = 8
    n_permutations: int = 199
    seed: int = 42

    def __post_init__(self):
        for name in ("cv_thr", "ibc_thr", "applicant_thr", "pending_thr", "decision_thr", "ma_thr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not self.ma1 < self.ma2:
            raise ValueError("ma1 must be smaller than ma2")
        if not 0 < self.na_thr < 1:
            raise ValueError("na_thr must lie in (0, 1)")
        if not (0 < self.pvalue < 1 and 0 < self.llag_thr < 1):
            raise ValueError("pvalue and llag_thr must lie in (0, 1)")
        if self.delta_max < 1:
            raise ValueError("delta_max must be >= 1")
        if self.n_permutations < 199:
            raise ValueError("n_permutations must be >= 199")
        if min(self.clean_w, self.alert_w, self.back_w) < 1:
            raise ValueError("window lengths must be positive")


@dataclass(frozen=True)
class ForecastConfig:
    n_ahead: int = 4
    prediction_win: int = 12
    alpha: float = 0.5
    burn: int = 12
    training_weeks: int = 52
    lambda_grid_size: int = 100
    lambda_min_ratio: float = 1e-4

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_ahead < 1:
            raise ValueError("n_ahead must be >= 1")
        if self.lambda_grid_size < 2:
            raise ValueError("lambda_grid_size must be >= 2")
        if self.training_weeks < 50:
            raise ValueError("training_weeks must be >= 50")
        if self.prediction_win < 2 or self.burn < 0:
            raise ValueError("invalid prediction_win/burn")
        if not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")


@dataclass(frozen=True)
class BacktestConfig:
    start_date: dt.date = dt.date(2017, 1, 1)
    final_date: dt.date | None = None
    training_floor: int = 50

    def __post_init__(self):
        if self.final_date is not None and not self.start_date < self.final_date:
            raise ValueError("start_date must precede final_date")
        if self.training_floor < 50:
            raise ValueError("training_floor must be >= 50")


DEFAULT_TOPICS = (
    "Passport",
    "Travel",
    "Travel visa",
    "Refugee",
    "Right of Asylum",
    "Egypt",
    "Iraq",
    "Jordan",
    "Lebanon",
    "Turkey",
    "Cyprus",
    "France",
    "Germany",
    "Greece",
    "Italy",
    "Spain",
    "European Union",
)

# dotted table names -> (section, attribute)
ALIASES = {
    "cv.thr": ("ew", "cv_thr"),
    "ibc.thr": ("ew", "ibc_thr"),
    "applicant.thr": ("ew", "applicant_thr"),
    "pending.thr": ("ew", "pending_thr"),
    "decision.thr": ("ew", "decision_thr"),
    "na.th": ("ew", "na_thr"),
    "ma1": ("ew", "ma1"),
    "ma2": ("ew", "ma2"),
    "ma.th": ("ew", "ma_thr"),
    "clean.w": ("ew", "clean_w"),
    "alert.w": ("ew", "alert_w"),
    "back.w": ("ew", "back_w"),
    "pvalue": ("ew", "pvalue"),
    "llag.th": ("ew", "llag_thr"),
    "delta.max": ("ew", "delta_max"),
    "n.ahead": ("fc", "n_ahead"),
    "prediction.win": ("fc", "prediction_win"),
    "alpha": ("fc", "alpha"),
    "burn": ("fc", "burn"),
    "start.date": ("bt", "start_date"),
    "final.date": ("bt", "final_date"),
}


@dataclass(frozen=True)
class RunConfig:
    ew: EarlyWarningConfig = field(default_factory=EarlyWarningConfig)
    fc: ForecastConfig = field(default_factory=ForecastConfig)
    bt: BacktestConfig = field(default_factory=BacktestConfig)
    origins: tuple[str, ...] = ()
    destinations: tuple[str, ...] = ()
    topics: tuple[str, ...] = DEFAULT_TOPICS
    data_dir: str | None = None
    paths: Mapping[str, str] = field(default_factory=dict)
    out_dir: str = "out"

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "RunConfig":
        sections: dict[str, dict[str, Any]] = {"ew": {}, "fc": {}, "bt": {}}
        top: dict[str, Any] = {}
        owners = {
            "ew": {f.name for f in dataclasses.fields(EarlyWarningConfig)},
            "fc": {f.name for f in dataclasses.fields(ForecastConfig)},
            "bt": {f.name for f in dataclasses.fields(BacktestConfig)},
        }
        for key, value in raw.items():
            if key in ALIASES:
                sec, attr = ALIASES[key]
                sections[sec][attr] = value
                continue
            for sec, names in owners.items():
                if key in names:
                    sections[sec][key] = value
                    break
            else:
                if key in ("origins", "destinations", "topics"):
                    top[key] = tuple(value or ())
                elif key in ("data_dir", "out_dir"):
                    top[key] = str(value)
                elif key == "paths":
                    top[key] = dict(value or {})
                else:
                    raise ValueError(f"unknown configuration key {key!r}")
        for k in ("start_date", "final_date"):
            v = sections["bt"].get(k)
            if isinstance(v, str):
                sections["bt"][k] = dt.date.fromisoformat(v)
        return cls(
            ew=EarlyWarningConfig(**sections["ew"]),
            fc=ForecastConfig(**sections["fc"]),
            bt=BacktestConfig(**sections["bt"]),
            **top,
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: configuration must be a key/value mapping")
        return cls.from_mapping(raw)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)
