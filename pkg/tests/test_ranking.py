import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowcast.ranking import ImportanceRow, heatmap_matrix, relative_rank, rf_importance
from flowcast.timeseries import WeekIndex


def test_single_active_variable():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 1))
    imp = rf_importance(x, 3 * x[:, 0], ["x"])
    assert imp == {"x": pytest.approx(1.0)}
    assert relative_rank(imp).scores == {"x": 1.0}


def test_empty_active_set():
    assert rf_importance(np.zeros((20, 0)), np.zeros(20), []) == {}
    row = relative_rank({}, universe=["a", "b"])
    assert row.scores == {"a": 0.0, "b": 0.0} and not any(row.included.values())


def test_too_few_rows():
    with pytest.raises(ValueError):
        rf_importance(np.ones((5, 2)), np.ones(5), ["a", "b"])


def test_dominant_variable_wins_across_seeds():
    wins = 0
    for seed in range(40):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 2))
        y = 10 * X[:, 0] + 0.01 * X[:, 1] + rng.normal(size=40)
        imp = rf_importance(X, y, ["x1", "x2"], seed=seed, n_trees=100)
        wins += imp["x1"] > imp["x2"]
    assert wins / 40 >= 0.95


def test_pure_noise_spreads_importance():
    calm = 0
    for seed in range(30):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 5))
        imp = rf_importance(X, rng.normal(size=40), list("abcde"), seed=seed, n_trees=100)
        calm += max(imp.values()) <= 3 * np.mean(list(imp.values()))
    assert calm / 30 >= 0.9


def test_bit_reproducible():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    y = X @ [1.0, 2.0, 0.0, 0.5] + rng.normal(size=30)
    assert rf_importance(X, y, list("abcd"), seed=7) == rf_importance(X, y, list("abcd"), seed=7)


def test_three_distinct():
    assert relative_rank({"a": 0.5, "b": 0.3, "c": 0.2}).scores == {"a": 1.0, "b": 0.5, "c": 0.0}


def test_tied_pair():
    s = relative_rank({"a": 0.4, "b": 0.4, "c": 0.2}).scores
    assert s["a"] == s["b"] == 0.75 and s["c"] == 0.0


def test_mask_separates_weakest_from_absent():
    row = relative_rank({"a": 0.6, "b": 0.4}, universe=["a", "b", "c"])
    assert row.scores["b"] == 0.0 and row.included["b"]
    assert row.scores["c"] == 0.0 and not row.included["c"]


importances = st.dictionaries(st.sampled_from(list("abcdefgh")), st.floats(0, 1e3, allow_nan=False), min_size=1)


@given(importances)
def test_monotone_invariance(raw):
    levels = sorted(set(raw.values()))
    a = relative_rank(raw).scores
    b = relative_rank({k: 7.0 * levels.index(v) - 3.0 for k, v in raw.items()}).scores
    assert a == pytest.approx(b)


@given(importances, st.lists(st.sampled_from(list("wxyz")), max_size=4))
def test_score_range(raw, extra):
    row = relative_rank(raw, universe=extra)
    assert all(0.0 <= v <= 1.0 for v in row.scores.values())
    assert all(row.scores[n] == 0.0 for n in extra if n not in raw)
    top = max(raw.values())
    if list(raw.values()).count(top) == 1:
        assert max(row.scores[n] for n in raw) == 1.0


def _row(i, scores):
    return ImportanceRow(WeekIndex(2018, 1) + i, scores, {k: True for k in scores})


def test_heatmap_single_row_score_order():
    S, M = heatmap_matrix([_row(0, {"b": 0.5, "a": 1.0, "c": 0.2})])
    assert list(S.columns) == ["a", "b", "c"] and S.shape == (1, 3)


def test_heatmap_early_before_late():
    rows = [_row(i, {"late": 1.0} if i >= 5 else {"early": 1.0}) for i in range(10)]
    S, M = heatmap_matrix(rows)
    assert list(S.columns) == ["early", "late"]
    assert S.loc[str(WeekIndex(2018, 1)), "late"] == 0.0 and not M.iloc[0]["late"]


def test_heatmap_all_zero():
    rows = [ImportanceRow(WeekIndex(2018, 1) + i, {"a": 0.0}, {"a": False}) for i in range(3)]
    S, M = heatmap_matrix(rows)
    assert S.shape == (3, 0) and M.shape == (3, 0)


def test_heatmap_weakest_active_kept():
    rows = [_row(i, {"a": 1.0, "b": 0.0}) for i in range(3)]
    S, M = heatmap_matrix(rows)
    assert list(S.columns) == ["a", "b"] and M["b"].all()
