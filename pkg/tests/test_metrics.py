import math

import numpy as np
import pytest

from core.exceptions import ParameterError
from core.metrics import (
    TOUCH, aggregate, decimation_stride, mean_std, report, segment_metrics, smooth_acceleration,
)
from core.simulation import SimTrace

BOUNDS = [("a", 0.0, 10.0), ("b", 10.0, 20.0)]


def _trace(decay_rate=5.0):
    t = np.arange(201) * 0.01
    y = np.where(t < 1.0, 0.05, 0.5 * np.exp(-decay_rate * (t - 1.0)))
    a_ref = np.full_like(t, 0.2)
    a_lat = a_ref + np.where(t < 1.0, 0.0, 0.1)
    data = np.column_stack([t, 10.0 * t, y, a_lat, a_ref])
    return SimTrace(("t", "s_ref", "y_e", "a_lat", "a_ref"), data, {"segments": [list(b) for b in BOUNDS]})


def test_constant_error_segment():
    a = segment_metrics(_trace())[0]
    assert a.n_samples == 100
    assert a.E_RMS == pytest.approx(0.05)
    assert a.E_RNG == pytest.approx(0.0)
    assert a.E_L10 == pytest.approx(0.05)
    assert a.A_RMS == pytest.approx(0.0)
    assert a.converged


def test_decaying_error_segment():
    b = segment_metrics(_trace(), BOUNDS)[1]
    t = 1.0 + np.arange(1, 11) * 0.1
    assert b.n_samples == 101
    assert b.E_RNG == pytest.approx(0.5 - 0.5 * math.exp(-5.0))
    assert b.E_L10 == pytest.approx(np.sqrt(np.mean((0.5 * np.exp(-5.0 * (t - 1.0))) ** 2)))
    assert b.A_RMS == pytest.approx(0.1)
    assert not b.converged
    assert segment_metrics(_trace(), BOUNDS, convergence=TOUCH)[1].converged


def test_fast_decay_converges_and_bounds_the_final_error():
    b = segment_metrics(_trace(decay_rate=20.0), BOUNDS)[1]
    assert b.converged
    assert b.E_L10 <= 0.1


def test_empty_segment_is_flagged():
    bounds = BOUNDS + [("c", 30.0, 40.0)]
    c = segment_metrics(_trace(), bounds)[2]
    assert c.short_segment and c.n_samples == 0
    assert math.isnan(c.E_RMS) and not c.converged


def test_metric_arguments_validated():
    with pytest.raises(ParameterError):
        segment_metrics(_trace(), convergence="sometimes")
    with pytest.raises(ParameterError):
        segment_metrics(SimTrace(("t", "s_ref"), np.zeros((2, 2))))


def test_decimation_stride():
    assert decimation_stride(np.arange(100) * 0.01) == 10
    assert decimation_stride(np.arange(100) * 0.1) == 1
    assert decimation_stride(np.array([0.0])) == 1


def test_smoothing_reduces_noise():
    rng = np.random.default_rng(0)
    t = np.arange(500) * 0.01
    clean = np.sin(t)
    noisy = clean + rng.normal(0.0, 0.1, t.size)
    smoothed = smooth_acceleration(noisy, 0.01)
    assert np.std(smoothed - clean) < 0.6 * np.std(noisy - clean)
    short = np.ones(3)
    assert smooth_acceleration(short, 0.01) is short


def test_mean_std():
    assert mean_std([1.0, 2.0, 3.0, math.nan]) == (2.0, 1.0)
    assert mean_std([4.0]) == (4.0, 0.0)
    assert all(math.isnan(v) for v in mean_std([math.nan]))


def test_aggregate_and_report():
    converged = segment_metrics(_trace(decay_rate=20.0))
    stuck = segment_metrics(_trace())
    table = aggregate([converged, stuck])
    assert table["b"].n_runs == 2
    assert table["b"].pct_converged == 50.0
    assert table["a"].pct_converged == 100.0
    assert table["a"].E_RMS == (pytest.approx(0.05), pytest.approx(0.0))

    rep = report({"PROP": table, "B": aggregate([stuck])})
    assert rep.columns == ["PROP", "B"]
    assert len(rep.rows) == 2 * 5
    rows = rep.csv_rows()
    assert rows[0] == ["segment", "metric", "PROP avg", "PROP std", "B avg", "B std"]
    assert rows[1][:2] == ["a", "E_RMS"]
    assert "%C" in rep.to_text()


def test_empty_aggregation_rejected():
    with pytest.raises(ParameterError):
        aggregate([])
    with pytest.raises(ParameterError):
        report({})
