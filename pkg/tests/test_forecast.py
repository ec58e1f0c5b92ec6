from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hostel_ops.errors import FitError, StructuralError
from hostel_ops.forecast import (
    Forecast, ForecastPoint, WeeklySeries, aggregate_weekly, design_matrix, fit_model, forecast_csv, heatmap_csv,
    model_from_dict, model_to_dict, predict, risk_heatmap, week_start,
)
from hostel_ops.triage import Complaint

MONDAY = date(2024, 1, 1)


def series(values, start=MONDAY, category="water", block="A"):
    weeks = tuple(start + timedelta(weeks=i) for i in range(len(values)))
    return WeeklySeries(category, block, weeks, tuple(values))


def truth(t):
    t = np.asarray(t, dtype=float)
    return 20 + 0.1 * t + 3 * np.sin(2 * np.pi * t / 52) - 1.5 * np.cos(4 * np.pi * t / 52)


def complaint(cid, at, category="water", block="A"):
    return Complaint(cid, category, "", "s", "r", block, at)


def test_week_start_is_monday():
    assert week_start(datetime(2024, 1, 7, 23, 59)) == MONDAY
    assert week_start(datetime(2024, 1, 8, 0, 0)) == date(2024, 1, 8)


def test_aggregation_fixture():
    counts = [5, 0, 7, 3, 15]
    items = []
    for w, n in enumerate(counts):
        for i in range(n):
            # first and last second of each week, then spread across the days
            offset = [timedelta(0), timedelta(days=7) - timedelta(seconds=1)][i] if i < 2 else timedelta(days=i % 7, hours=i)
            items.append(complaint(f"c{w}-{i}", datetime.combine(MONDAY, datetime.min.time()) + timedelta(weeks=w) + offset))
    items.append(complaint("other-cat", datetime(2024, 1, 2), "civil"))
    items.append(complaint("other-block", datetime(2024, 1, 2), block="B"))
    s = aggregate_weekly(items, "water", "A")
    assert s.counts == tuple(counts)
    assert s.filled == (False, True, False, False, False)
    assert sum(s.counts) == 30
    assert sum(aggregate_weekly(items, "water").counts) == 31


def test_aggregation_empty():
    assert len(aggregate_weekly([], "water")) == 0


def test_series_validation():
    with pytest.raises(StructuralError):
        WeeklySeries("w", None, (MONDAY, MONDAY + timedelta(days=8)), (1, 2))
    with pytest.raises(StructuralError):
        WeeklySeries("w", None, (MONDAY,), (1, 2))
    with pytest.raises(StructuralError):
        series([1, -1])


def test_noiseless_recovery():
    t = np.arange(104)
    m = fit_model(series(truth(t)))
    assert m.intercept == pytest.approx(20, abs=1e-6)
    assert m.slope == pytest.approx(0.1, abs=1e-6)
    assert m.seasonal[0] == pytest.approx((3.0, 0.0), abs=1e-6)
    assert m.seasonal[1] == pytest.approx((0.0, -1.5), abs=1e-6)
    assert m.seasonal[2] == pytest.approx((0.0, 0.0), abs=1e-6)
    f = predict(m, steps=8)
    np.testing.assert_allclose([p.point for p in f.horizon], truth(np.arange(104, 112)), atol=1e-6)
    assert m.residual_sigma < 1e-6


def test_minimum_length():
    with pytest.raises(FitError):
        fit_model(series([1] * 7))
    with pytest.raises(FitError):
        fit_model(series([1] * 9), harmonics=4)
    fit_model(series([1, 2] * 5), harmonics=4)
    with pytest.raises(FitError):
        fit_model(series([1] * 20), harmonics=-1)


def test_sparse_series_is_low_confidence(caplog):
    m = fit_model(series([0, 0, 0, 5, 0, 0, 0, 1, 0, 0]), harmonics=1)
    assert m.low_confidence
    assert predict(m).low_confidence
    assert "sparse" in caplog.text


def test_interval_floor_and_constant_width():
    m = fit_model(series([3, 0, 1, 0, 2, 0, 0, 1, 0, 0, 0, 0]), harmonics=1)
    f = predict(m, steps=12)
    widths = set()
    for p in f.horizon:
        assert 0.0 <= p.lower <= p.point <= p.upper
        if p.lower > 0:
            widths.add(round(p.upper - p.lower, 9))
    assert len(widths) <= 1
    with pytest.raises(StructuralError):
        predict(m, steps=0)


def test_horizon_dates_follow_training():
    m = fit_model(series([5.0] * 10), harmonics=1)
    f = predict(m, steps=3)
    assert [p.week_start for p in f.horizon] == [MONDAY + timedelta(weeks=w) for w in (10, 11, 12)]


def test_staleness():
    m = fit_model(series([5.0] * 10), harmonics=1, fitted_on=date(2024, 3, 1))
    assert not m.is_stale(date(2024, 4, 5))
    assert m.is_stale(date(2024, 4, 6))


def test_model_round_trip():
    m = fit_model(series(truth(np.arange(60))), fitted_on=date(2024, 3, 1))
    assert model_from_dict(model_to_dict(m)) == m
    with pytest.raises(StructuralError):
        model_from_dict({"schema_version": 1})


def test_heatmap_fixture():
    def fc(block, cat, peak):
        return Forecast(cat, block, (ForecastPoint(MONDAY, peak / 2, 0, peak), ForecastPoint(MONDAY, peak, 0, peak)))

    grid = risk_heatmap([
        fc("A", "electrical", 1.0), fc("A", "water", 2.5),
        fc("B", "electrical", 4.1), fc("B", "water", 2.0),
        fc("C", "electrical", 4.0), fc("C", "water", 0.0),
    ])
    assert grid == {
        ("A", "electrical"): "low", ("A", "water"): "medium",
        ("B", "electrical"): "high", ("B", "water"): "low",
        ("C", "electrical"): "medium", ("C", "water"): "low",
    }
    assert heatmap_csv(grid).splitlines() == [
        "block,electrical,water", "A,low,medium", "B,high,low", "C,medium,low",
    ]
    with pytest.raises(StructuralError):
        risk_heatmap([], medium=3, high=2)


def test_forecast_csv_header():
    m = fit_model(series([5.0] * 10), harmonics=1)
    text = forecast_csv([predict(m, steps=2)])
    assert text.splitlines()[0] == "block,category,week_start,point,lower,upper,low_confidence"
    assert len(text.splitlines()) == 3


@given(st.integers(0, 200), st.integers(1, 4))
def test_design_matrix_shape(n, k):
    X = design_matrix(np.arange(n), k)
    assert X.shape == (n, 2 + 2 * k)


@given(st.lists(st.integers(0, 30), min_size=8, max_size=60))
def test_fit_predict_invariants(values):
    m = fit_model(series(values))
    for p in predict(m, steps=5).horizon:
        assert 0.0 <= p.lower <= p.point <= p.upper
        assert np.isfinite(p.upper)
