import numpy as np
from hypothesis import given, strategies as st

from vehcache.checks import (
    is_nonincreasing,
    is_unimodal,
    run_check,
    saturates,
    step_signs,
    strictly_decreasing_after_peak,
)
from vehcache.sim import ScenarioConfig


def _replicated(means, noise=0.01, n=5, seed=0):
    rng = np.random.default_rng(seed)
    shared = rng.normal(0, 1, n)  # seed effect common to every point
    return np.asarray(means, float)[:, None] + shared[None, :] + noise * rng.normal(size=(len(means), n))


def test_step_signs_examples():
    assert step_signs(_replicated([1, 2, 2, 1])) == [1, 0, -1]
    # paired differences remove the large shared seed effect
    assert step_signs(_replicated([0.0, 0.1], noise=1e-3)) == [1]


def test_trend_classifiers():
    assert is_nonincreasing(_replicated([3, 2, 2, 1]))
    assert not is_nonincreasing(_replicated([3, 2, 2.5, 1]))
    assert is_unimodal(_replicated([1, 2, 3, 2, 2]))
    assert is_unimodal(_replicated([1, 2, 3, 3, 3]))
    assert not is_unimodal(_replicated([3, 2, 1, 1]))
    assert not is_unimodal(_replicated([1, 2, 1, 2]))


def test_saturation_examples():
    x = np.array([0.1, 0.2, 0.3, 0.5, 0.7, 1.0])
    assert saturates(x, 1 - np.exp(-5 * x))
    assert not saturates(x, x)
    assert not saturates(x, x ** 2)
    assert not saturates(x, -x)


def test_strictly_decreasing_after_peak_examples():
    assert strictly_decreasing_after_peak([1, 3, 2, 1])
    assert strictly_decreasing_after_peak([3, 2, 1])
    assert not strictly_decreasing_after_peak([1, 3, 2, 2])


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=8))
def test_single_replicate_monotone_sequences(vals):
    srt = sorted(vals, reverse=True)
    assert is_nonincreasing(srt)


def test_run_check_catches_bad_params():
    res = run_check({"name": "b", "kind": "metric_bounds", "params": {}}, ScenarioConfig(n_slots=5))
    assert not res.passed and "error" in res.measured
    res = run_check({"name": "q", "kind": "queue_oracle", "params": {"rates": [1, 2, 1, 1]}, "tol": 1e-6},
                    ScenarioConfig())
    assert res.passed and res.line().startswith("PASS q")
