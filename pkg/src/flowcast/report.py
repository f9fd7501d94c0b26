"""Report files: JSON, CSV and hand-written SVG.

Every writer produces byte-identical output for identical input: keys are
sorted, floats are written with ``repr`` and NaN becomes an empty cell or
``null``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from .backtest import BacktestResult, confidence_band, traffic_light
from .earlywarning import EarlyWarningReport
from .timeseries import WeeklySeries


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else (str(f) if math.isinf(f) else f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_csv(rows: Iterable[Mapping], path, columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


# -- early warning ---------------------------------------------------------------

EW_COLUMNS = [
    "origin", "as_of", "series", "alert_level", "momentum_weeks", "last_momentum",
    "mean_cp_week", "mean_cp_p", "var_cp_week", "var_cp_p", "theta_hat", "lead_lag_p", "leader",
]


def early_warning_rows(rep: EarlyWarningReport) -> list[dict]:
    rows = []
    for sid, sig in rep.per_series.items():
        est = rep.lag_matrix.get((sid, rep.target_id))
        rows.append(
            {
                "origin": rep.origin,
                "as_of": str(rep.as_of),
                "series": sid,
                "alert_level": f"L{sig.alert_level}",
                "momentum_weeks": len(sig.momentum),
                "last_momentum": str(sig.momentum[-1][0]) if sig.momentum else "",
                "mean_cp_week": str(sig.mean_cp.location) if sig.mean_cp.location else "",
                "mean_cp_p": sig.mean_cp.p_value,
                "var_cp_week": str(sig.var_cp.location) if sig.var_cp.location else "",
                "var_cp_p": sig.var_cp.p_value,
                "theta_hat": est.theta_hat if est else "",
                "lead_lag_p": est.p_value if est else None,
                "leader": est.leader if est else "",
            }
        )
    return rows


# -- backtest ---------------------------------------------------------------------

BACKTEST_COLUMNS = ["origin", "destination", "as_of", "status", "forecast", "benchmark", "actual", "rel_err", "abs_err", "chosen_lambda", "active_set"]


def backtest_rows(res: BacktestResult, origin: str, destination: str) -> list[dict]:
    return [
        {
            "origin": origin,
            "destination": destination,
            "as_of": str(r.as_of),
            "status": r.status,
            "forecast": r.forecast,
            "benchmark": r.benchmark,
            "actual": r.actual,
            "rel_err": r.rel_err,
            "abs_err": r.abs_err,
            "chosen_lambda": r.lam,
            "active_set": ";".join(r.active),
        }
        for r in res.rows
    ]


def traffic_table(summaries: Mapping[tuple[str, str], Mapping]) -> list[dict]:
    """One row per dyad: mean errors for model and benchmark plus the class."""
    out = []
    for (o, d), s in sorted(summaries.items()):
        m, b = s["model"], s["benchmark"]
        cls = traffic_light(m["rel"]["mean"], m["abs"]["mean"]) if s["n_weeks"] else ""
        out.append(
            {
                "origin": o,
                "destination": d,
                "n_weeks": s["n_weeks"],
                "rel_mean": m["rel"]["mean"],
                "rel_median": m["rel"]["median"],
                "abs_mean": m["abs"]["mean"],
                "abs_median": m["abs"]["median"],
                "bench_rel_mean": b["rel"]["mean"],
                "bench_abs_mean": b["abs"]["mean"],
                "class": cls,
            }
        )
    return out


TRAFFIC_COLUMNS = ["origin", "destination", "n_weeks", "rel_mean", "rel_median", "abs_mean", "abs_median", "bench_rel_mean", "bench_abs_mean", "class"]


# -- SVG ---------------------------------------------------------------------------


def _f(x: float) -> str:
    return f"{x:.2f}"


def heatmap_svg(scores: pd.DataFrame, mask: pd.DataFrame, path, cell: int = 14) -> None:
    """Weeks down, variables across; grey marks 'not included'."""
    n_rows, n_cols = scores.shape
    left, top = 90, 150
    w, h = left + n_cols * cell + 10, top + n_rows * cell + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="9">']
    for j, name in enumerate(scores.columns):
        x = left + j * cell + cell / 2
        parts.append(f'<text transform="translate({_f(x)},{top - 4}) rotate(-60)">{escape(str(name))}</text>')
    for i, label in enumerate(scores.index):
        y = top + i * cell
        parts.append(f'<text x="2" y="{_f(y + cell - 3)}">{escape(str(label))}</text>')
        for j in range(n_cols):
            if mask.iat[i, j]:
                v = float(scores.iat[i, j])
                shade = int(round(255 * (1 - v)))
                fill = f"rgb(255,{shade},{shade})"
            else:
                fill = "rgb(225,225,225)"
            parts.append(f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def backtest_svg(target: WeeklySeries, res: BacktestResult, n_ahead: int, path, band_window: int = 12) -> None:
    """Actual n_ahead-week totals, model and benchmark totals, and a band
    around the moving average of the actual totals."""
    weeks = [str(r.as_of) for r in res.rows]
    A = np.array([r.actual for r in res.rows], dtype=float)
    F = np.array([r.forecast for r in res.rows], dtype=float)
    B = np.array([r.benchmark for r in res.rows], dtype=float)
    if not weeks:
        Path(path).write_text('<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"/>\n', encoding="utf-8")
        return
    band = None
    if len(weeks) >= band_window and np.isfinite(A).sum() >= 2:
        band = confidence_band(WeeklySeries("actual", res.rows[0].as_of, A), band_window)
    vals = np.concatenate([v[np.isfinite(v)] for v in (A, F, B)] + ([band[1][np.isfinite(band[1])], band[2][np.isfinite(band[2])]] if band else []))
    lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    W, H, pad = 720, 320, 40
    n = len(weeks)

    def xy(i, v):
        return pad + i * (W - 2 * pad) / max(n - 1, 1), H - pad - (v - lo) / (hi - lo) * (H - 2 * pad)

    def poly(v, colour, dash=""):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (xy(i, float(z)) for i, z in enumerate(v) if np.isfinite(z)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{extra} points="{pts}"/>'

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="10">']
    if band:
        upper = [xy(i, float(v)) for i, v in enumerate(band[2]) if np.isfinite(v)]
        lower = [xy(i, float(v)) for i, v in enumerate(band[1]) if np.isfinite(v)][::-1]
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in upper + lower)
        parts.append(f'<polygon fill="rgb(200,220,240)" stroke="none" points="{pts}"/>')
    parts.append(poly(A, "black"))
    parts.append(poly(F, "rgb(200,30,30)"))
    parts.append(poly(B, "rgb(30,90,200)", "4,3"))
    parts.append(f'<text x="{pad}" y="14">{escape(res.target_id)}: {n_ahead}-week totals (black actual, red model, blue benchmark)</text>')
    parts.append(f'<text x="{pad}" y="{H - 8}">{escape(weeks[0])}</text>')
    parts.append(f'<text x="{W - pad - 50}" y="{H - 8}">{escape(weeks[-1])}</text>')
    parts.append(f'<text x="2" y="{pad}">{hi:.0f}</text><text x="2" y="{H - pad}">{lo:.0f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
