import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vehcache import sim
from vehcache.errors import DomainError, StabilityViolation
from vehcache.interaction import kappa1_from_rates
from vehcache.sim import (
    METRIC_FIELDS,
    Episode,
    ScenarioConfig,
    run_episode,
    run_slot,
    spawn_users,
    spawn_vehicles,
    sweep,
)

SHORT = ScenarioConfig(n_slots=200, seed=7)


def test_spawn_users_examples():
    rng = np.random.default_rng(0)
    assert spawn_users(0.0, 350.0, rng).count == 0
    users = spawn_users(5000.0, 350.0, rng)
    assert np.all(np.hypot(*users.positions.T) <= 350.0)


def test_spawn_users_mean_count():
    rng = np.random.default_rng(1)
    counts = np.array([spawn_users(20.0, 350.0, rng).count for _ in range(100_000)])
    assert counts.mean() == pytest.approx(20.0, rel=0.01)


def test_spawn_vehicles_cache_flags():
    rng = np.random.default_rng(2)
    assert spawn_vehicles(50.0, 0.0, 350.0, rng).n_caching == 0
    fleet = spawn_vehicles(50.0, 1.0, 350.0, rng)
    assert fleet.n_caching == fleet.count
    big = spawn_vehicles(100_000.0, 0.5, 350.0, rng)
    assert big.n_caching / big.count == pytest.approx(0.5, abs=0.01)
    assert np.all(np.hypot(*big.positions.T) <= 350.0 + 1e-9)


def test_spawn_rejects_bad_inputs():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        spawn_users(-1.0, 350.0, rng)
    with pytest.raises(DomainError):
        spawn_vehicles(10.0, 1.5, 350.0, rng)


def test_config_validation():
    with pytest.raises(DomainError):
        SHORT.with_value("population.cache_proportion", 1.3)
    with pytest.raises(DomainError):
        SHORT.with_value("n_slots", 0)
    with pytest.raises(DomainError):
        SHORT.with_value("control.policy", "greedy")
    assert SHORT.with_value("rates.lam", 0.5).get_value("rates.lam") == 0.5


def test_same_seed_gives_identical_metrics():
    a, b = run_episode(SHORT), run_episode(SHORT)
    assert a.row() == b.row()
    c = run_episode(SHORT.with_value("seed", 8))
    assert a.row() != c.row()


def test_no_caching_policy_has_zero_gain():
    m = run_episode(SHORT.with_value("control.policy", "none"))
    assert m.system_gain == 0.0
    assert m.hit_ratio == 0.0 and m.vehicle_served == 0
    assert m.eta_ee == pytest.approx(m.eta_novc, rel=1e-12)


def test_requests_are_conserved_every_slot():
    ep = Episode(SHORT, keep_traces=True)
    m = ep.run()
    assert m.requests == m.vehicle_served + m.cellular_served + int(ep.chains.j.sum())
    tr = m.traces
    assert np.all(tr["vehicle_served"] + tr["cellular_served"] <= np.cumsum(tr["arrivals"]))


def test_empty_cache_sends_everything_to_mbs():
    ep = Episode(SHORT)
    for _ in range(20):
        led = run_slot(ep, q_current=np.zeros_like(ep.q))
        assert led.vehicle_served == 0 and led.r_veh == 0.0
        assert led.p_veh_tx == 0.0


def test_guaranteed_contact_serves_by_vehicle():
    cfg = SHORT.with_value("control.fixed_xi_eff", 1e6).with_value("n_slots", 100)
    m = run_episode(cfg)
    assert m.vehicle_share > 0.999
    assert m.hit_ratio > 0.99


def test_fixed_meeting_rate_matches_vehicle_share():
    cfg = (SHORT.with_value("control.fixed_xi_eff", 1.0).with_value("rates.lam", 1.0)
           .with_value("rates.nu", 2.0).with_value("rates.omega", 1.0)
           .with_value("population.user_intensity", 200.0).with_value("n_slots", 600))
    m = run_episode(cfg)
    assert m.requests > 100_000
    assert m.vehicle_share == pytest.approx(kappa1_from_rates(1.0, 1.0, 2.0), abs=0.02)


def test_online_beats_no_caching_on_paired_seed():
    base = ScenarioConfig(n_slots=400, seed=3)
    online = run_episode(base)
    none = run_episode(base.with_value("control.policy", "none"))
    assert online.eta_ee < none.eta_ee
    assert online.system_gain > 0


def test_offline_solves_at_update_instants_only():
    cfg = SHORT.with_value("control.policy", "offline").with_value("control.offline_update_interval_slots", 50)
    ep = Episode(cfg, keep_traces=True)
    m = ep.run()
    pushed = np.flatnonzero(np.diff(m.traces["cached_fragments"]) != 0) + 1
    assert np.all(pushed % 50 == 1)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["online", "offline", "none"]), st.integers(0, 10_000),
       st.floats(0.0, 1.0), st.floats(0.2, 1.8))
def test_metric_bounds(policy, seed, cp, lam):
    cfg = (ScenarioConfig(n_slots=60, seed=seed).with_value("control.policy", policy)
           .with_value("population.cache_proportion", cp).with_value("rates.lam", lam))
    m = run_episode(cfg)
    assert 0.0 <= m.hit_ratio <= 1.0
    assert 0.0 <= m.cache_utilization <= 1.0
    assert m.system_gain >= -1.0
    if m.requests:
        assert m.eta_ee > 0
    assert set(m.row()) == set(METRIC_FIELDS)


def test_cache_vector_stays_feasible():
    ep = Episode(SHORT)
    budget = ep.capacity_bits / ep.catalog.fragment_size_bits
    for _ in range(50):
        ep.step()
        assert ep.q.min() >= 0 and ep.q.max() <= 1
        assert ep.q.sum() <= budget + 1e-9


def test_unstable_rates_rejected_at_config_time():
    with pytest.raises(StabilityViolation):
        SHORT.with_value("rates.lam", 5.0)


def test_sweep_captures_errors_per_row(monkeypatch):
    good = SHORT.with_value("n_slots", 20)
    bad = good.with_value("seed", 99)
    expected = run_episode(good).row()
    real = sim.run_episode

    def flaky(config, keep_traces=False):
        if config.seed == 99:
            raise StabilityViolation("injected")
        return real(config, keep_traces)

    monkeypatch.setattr(sim, "run_episode", flaky)
    rows = sweep([good, bad, good])
    assert rows[0].error is None and rows[2].error is None
    assert rows[1].metrics is None and rows[1].error == "StabilityViolation: injected"
    assert rows[0].metrics.row() == expected
    with pytest.raises(DomainError):
        sweep([])


def test_bound_gap_is_finite_for_online():
    m = run_episode(SHORT)
    assert math.isfinite(m.bound_gap) and m.bound_gap >= 0
