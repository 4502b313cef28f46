import numpy as np
import pytest

import core.batch_runner as batch_runner
from core.batch_runner import batch, repeat_seeds
from core.exceptions import ParameterError
from core.scenario import default_scenario


def _scenario(**overrides):
    fields = dict(duration=1.0)
    fields.update(overrides)
    return default_scenario(**fields)


def test_repeat_seeds_counts_up_from_the_scenario_seed():
    copies = repeat_seeds(_scenario(seed=5), 3)
    assert [sc.seed for sc in copies] == [5, 6, 7]
    assert repeat_seeds(_scenario(seed=5), 2, first_seed=0)[1].seed == 1
    with pytest.raises(ParameterError):
        repeat_seeds(_scenario(), 0)


def test_failed_runs_are_recorded_in_order():
    scenarios = [_scenario(), _scenario(name="lost", y_e0=11.0), _scenario(seed=3)]
    result = batch(scenarios, workers=1)
    assert result.traces[1] is None
    assert [f.index for f in result.failures] == [1]
    assert result.failures[0].scenario == "lost"
    assert "ProjectionLostError" in result.failures[0].message
    assert len(result.succeeded) == 2


def test_unexpected_errors_do_not_stop_a_sequential_batch(monkeypatch):
    real_run = batch_runner.run

    def flaky_run(scenario):
        if scenario.name == "broken":
            raise ValueError("bad table")
        return real_run(scenario)

    monkeypatch.setattr(batch_runner, "run", flaky_run)
    result = batch([_scenario(), _scenario(name="broken"), _scenario(seed=2)], workers=1)
    assert [f.index for f in result.failures] == [1]
    assert result.failures[0].message == "ValueError: bad table"
    assert result.traces[0] is not None and result.traces[2] is not None


def test_empty_batch_rejected():
    with pytest.raises(ParameterError):
        batch([])


@pytest.mark.slow
def test_worker_pool_matches_sequential_runs():
    scenarios = repeat_seeds(_scenario(), 3)
    sequential = batch(scenarios, workers=1)
    pooled = batch(scenarios, workers=2)
    assert not pooled.failures
    for a, b in zip(sequential.traces, pooled.traces):
        assert np.array_equal(a.data, b.data)
