import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from alstm_traffic.dataio import SyntheticConfig, generate_synthetic
from alstm_traffic.evaluation import (
    MetricsReport,
    boxplot_stats,
    correlations,
    evaluate,
    persistence_baseline,
    series_boxplots,
    split_timeseries,
)
from alstm_traffic.features import HolidayCalendar
from alstm_traffic.network import ModelVariant, WindowSet, n_params, unflatten


def test_split_minimal_instance():
    plan = split_timeseries(8)
    assert (plan.unit, plan.remainder) == (1, 0)
    assert [s.sizes() for s in plan.splits] == [(2, 1, 1), (4, 1, 1), (6, 1, 1)]


def test_split_five_minute_table():
    plan = split_timeseries(192_355)
    assert (plan.unit, plan.remainder) == (24_044, 3)
    assert [s.sizes() for s in plan.splits] == [(48_091, 24_044, 24_044), (96_179, 24_044, 24_044), (144_267, 24_044, 24_044)]


def test_split_too_small():
    with pytest.raises(ValueError):
        split_timeseries(7)
    with pytest.raises(ValueError):
        split_timeseries(100, k=0)


@given(st.integers(8, 10**7), st.integers(1, 6))
def test_split_invariants(n, k):
    if n < 2 * k + 2:
        return
    plan = split_timeseries(n, k)
    trains = [s.sizes()[0] for s in plan.splits]
    assert all(a < b for a, b in zip(trains, trains[1:]))
    for s in plan.splits:
        assert s.train[0] == 0 and s.train[1] == s.valid[0] and s.valid[1] == s.test[0]
        assert s.sizes()[1] == s.sizes()[2] == plan.unit
    assert sum(plan.splits[-1].sizes()) == n
    json.dumps(plan.to_dict())


def _windows(lags_last, target):
    n = len(target)
    lags = np.zeros((n, 5, 2))
    lags[:, -1] = lags_last
    return WindowSet(lags, np.zeros((n, 24)), np.asarray(target, float))


def test_evaluate_constant_half():
    v = ModelVariant(kind="lstm")
    p = unflatten(np.zeros(n_params(v)), v)
    w = _windows(np.zeros((4, 2)), [[0, 1], [1, 0], [1, 1], [0, 0]])
    assert evaluate(p, v, w) == pytest.approx(250.0, abs=1e-12)
    assert evaluate(p, v, w[[3, 1, 0, 2]]) == pytest.approx(250.0, abs=1e-12)
    with pytest.raises(ValueError):
        evaluate(p, v, w[[]])


def test_persistence_examples():
    w = _windows([[0.2, 0.4], [0.6, 0.1]], [[0.2, 0.4], [0.6, 0.1]])
    assert persistence_baseline(w) == 0.0
    w = _windows([[0, 0], [1, 1]], [[1, 1], [0, 0]])
    assert persistence_baseline(w) == pytest.approx(1000.0)


def test_metrics_report(tmp_path):
    r = MetricsReport(15, "cyclic")
    r.add("alstm", 1, "test", 30.4)
    r.add("alstm", 2, "test", 31.8)
    r.add("alstm", 1, "train", 20.0)
    assert r.average("alstm", "test") == pytest.approx(31.1)
    with pytest.raises(ValueError):
        r.add("alstm", 1, "holdout", 1.0)
    r.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "model,encoding,split,15min_train,15min_valid,15min_test"
    assert lines[1] == "alstm,cyclic,1,20,,30"
    assert lines[-1].startswith("alstm,cyclic,average,20,")
    r.to_json(tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text())["models"]["alstm"]["splits"]["2"]["test"] == 31.8


def _series(days=3, seed=0):
    return generate_synthetic(SyntheticConfig(days=days, noise=0.3, start=dt.date(2018, 5, 1)), seed)


def test_correlations_examples():
    s = _series()
    c = correlations(s)
    np.testing.assert_array_equal(np.diag(c), 1.0)
    np.testing.assert_allclose(c, c.T, atol=0)
    assert np.linalg.eigvalsh(c).min() > -1e-8
    s.speed[:] = 2 * s.volume + 3
    assert correlations(s)[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_correlations_match_oracle():
    s = _series(seed=4)
    c = correlations(s)
    chans = [s.volume, s.speed, s.reverse_volume, s.reverse_speed]
    for i in range(4):
        for j in range(4):
            if i != j:
                assert abs(c[i, j] - oracles.pearson(chans[i].tolist(), chans[j].tolist())) < 1e-10


def test_correlations_zero_variance_and_short():
    s = _series()
    s.reverse_speed[:] = 50.0
    c = correlations(s)
    assert np.isnan(c[3, 0]) and np.isnan(c[0, 3]) and c[3, 3] == 1.0
    s.volume[2:] = np.nan
    with pytest.raises(ValueError):
        correlations(s)


def test_boxplot_examples():
    stats, notes = boxplot_stats(np.array([1.0, 2, 3, 4, 7]), ["a", "a", "a", "a", "b"])
    a, b = stats
    assert a["median"] == 2.5 and a["q1"] == 1.75 and a["q3"] == 3.25 and a["count"] == 4
    assert b["min"] == b["q1"] == b["median"] == b["q3"] == b["max"] == 7.0
    assert notes == []


def test_boxplot_canonical_order_and_notes():
    stats, notes = boxplot_stats(np.arange(4.0), ["snowy", "sunny", "sunny", "snowy"], "weather")
    assert [s["level"] for s in stats] == ["sunny", "snowy"]
    assert notes == ["weather=rainy: no observations, skipped"]
    with pytest.raises(ValueError):
        boxplot_stats(np.array([np.nan]), ["a"])


def test_series_boxplots_partition():
    s = _series(days=7)
    s.volume[10] = np.nan
    for var in ("hour", "day_of_week", "holiday", "is_day"):
        stats, _ = series_boxplots(s, HolidayCalendar(), var)
        assert sum(x["count"] for x in stats) == len(s) - 1
    with pytest.raises(ValueError):
        series_boxplots(s, HolidayCalendar(), "minute")
