"""Relative importance of the selected regressors, week by week."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata
from sklearn.ensemble import RandomForestRegressor

from .timeseries import WeekIndex


@dataclass
class ImportanceRow:
    """Relative-rank scores in [0, 1]; ``included`` separates a zero score
    of the weakest active variable from a variable that was not selected."""

    as_of: WeekIndex | None
    scores: dict[str, float]
    included: dict[str, bool] = field(default_factory=dict)


def rf_importance(X, y, names: Sequence[str], seed: int = 42, n_trees: int = 200) -> dict[str, float]:
    """Impurity-based (variance reduction) importance from a regression forest.

    Uses ``ceil(p/3)`` candidate features per split and bootstrap rows.
    """
    names = list(names)
    if not names:
        return {}
    X = np.asarray(X, dtype=np.float64).reshape(-1, len(names))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 10:
        raise ValueError("need at least 10 rows for a forest")
    forest = RandomForestRegressor(
        n_estimators=n_trees,
        max_features=math.ceil(len(names) / 3),
        bootstrap=True,
        random_state=seed,
        n_jobs=1,
    )
    forest.fit(X, y)
    return dict(zip(names, map(float, forest.feature_importances_)))


def relative_rank(raw: Mapping[str, float], universe: Sequence[str] = (), as_of: WeekIndex | None = None) -> ImportanceRow:
    """Map raw importances to ``1 - (rank - 1) / max(p - 1, 1)``.

    Rank 1 is the largest importance; ties share the mean score of the
    positions they occupy. Names in ``universe`` but not in ``raw`` score 0
    and are marked as not included.
    """
    names = list(raw)
    scores = {n: 0.0 for n in universe}
    included = {n: False for n in universe}
    if names:
        vals = np.array([raw[n] for n in names], dtype=np.float64)
        ranks = rankdata(-vals, method="average")
        denom = max(len(names) - 1, 1)
        for n, r in zip(names, ranks):
            scores[n] = float(1.0 - (r - 1.0) / denom)
            included[n] = True
    return ImportanceRow(as_of, scores, included)


def heatmap_matrix(rows: Sequence[ImportanceRow]) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Weeks x variables score matrix and matching included-mask.

    Columns never included and never scored are dropped. The rest are ordered by the
    mean row position weighted by score, so variables that matter early
    come first; ties keep the order of the first row's scores.
    """
    if not rows:
        raise ValueError("need at least one row")
    index = [str(r.as_of) if r.as_of is not None else i for i, r in enumerate(rows)]
    seen: dict[str, None] = {}
    for r in rows:
        for n, _ in sorted(r.scores.items(), key=lambda kv: -kv[1]):
            seen.setdefault(n)
    cols = list(seen)
    S = np.array([[r.scores.get(c, 0.0) for c in cols] for r in rows]).reshape(len(rows), len(cols))
    M = np.array([[r.included.get(c, r.scores.get(c, 0.0) > 0) for c in cols] for r in rows], dtype=bool).reshape(S.shape)
    # a variable that was always the weakest active one has zero score mass;
    # its inclusion pattern stands in for the mass then
    W = np.where(S.sum(axis=0) > 0, S, M.astype(np.float64))
    keep = W.sum(axis=0) > 0
    pos = np.arange(len(rows), dtype=np.float64)
    centroid = {c: float(pos @ W[:, j] / W[:, j].sum()) for j, c in enumerate(cols) if keep[j]}
    order = sorted(centroid, key=lambda c: (centroid[c], cols.index(c)))
    jj = [cols.index(c) for c in order]
    scores = pd.DataFrame(S[:, jj], index=index, columns=order)
    mask = pd.DataFrame(M[:, jj], index=index, columns=order)
    return scores, mask
