import pytest
from hypothesis import given, strategies as st

from vehcache.energy import EnergyLedger, EnergyParams, mbs_energy, total_energy, vehicle_energy
from vehcache.errors import DomainError

PARAMS = EnergyParams()


def test_mbs_energy_examples():
    assert mbs_energy(1e8, PARAMS) == pytest.approx(0.5)
    assert mbs_energy(0.0, PARAMS) == 0.0
    assert mbs_energy(2e8, PARAMS) == pytest.approx(1.0)


def test_vehicle_energy_examples():
    p_tx, p_cache, p_bh = vehicle_energy(0.0, 0.0, 0.2, PARAMS)
    assert p_tx == pytest.approx(3.026)
    assert (p_cache, p_bh) == (0.0, 0.0)
    _, p_cache, _ = vehicle_energy(1e9, 0.0, 0.2, PARAMS)
    assert p_cache == pytest.approx(6.25e-3)
    _, _, p_bh = vehicle_energy(0.0, 2e7, 0.0, PARAMS)
    assert p_bh == pytest.approx(0.1)


def test_slot_length_scales_power_terms():
    long_slot = EnergyParams(slot_seconds=2.0)
    p_tx, p_cache, p_bh = vehicle_energy(1e9, 1e7, 0.2, long_slot)
    assert p_tx == pytest.approx(6.052)
    assert p_cache == pytest.approx(1.25e-2)
    assert p_bh == pytest.approx(0.05)


def test_total_energy_examples():
    assert total_energy(0, 0, 0, 0).p_total == 0.0
    assert total_energy(0.5, 3.026, 6.25e-3, 0.1).p_total == pytest.approx(3.63225, rel=1e-12)
    assert total_energy(0, 0, 0.7, 0).p_total == 0.7


def test_negative_inputs_rejected():
    with pytest.raises(DomainError):
        mbs_energy(-1.0, PARAMS)
    with pytest.raises(DomainError):
        vehicle_energy(1.0, -1.0, 0.1, PARAMS)
    with pytest.raises(DomainError):
        total_energy(0, -0.1, 0, 0)
    with pytest.raises(DomainError):
        EnergyParams(amplifier_factor=0.0)


bits = st.floats(0, 1e12)


@given(bits, bits, bits)
def test_bit_terms_are_linear(r_m, r_v, pushed):
    def bit_energy(scale):
        _, c, b = vehicle_energy(scale * r_v, scale * pushed, 0.2, PARAMS)
        return mbs_energy(scale * r_m, PARAMS) + c + b

    assert bit_energy(2.0) == pytest.approx(2.0 * bit_energy(1.0), rel=1e-12, abs=1e-300)


@given(bits, bits, st.floats(0, 1e9), st.floats(0, 1e9))
def test_caching_more_never_lowers_cache_cost(r_v, pushed, extra_served, extra_pushed):
    _, c0, b0 = vehicle_energy(r_v, pushed, 0.2, PARAMS)
    _, c1, b1 = vehicle_energy(r_v + extra_served, pushed + extra_pushed, 0.2, PARAMS)
    assert c1 + b1 >= c0 + b0


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_ledger_total_is_sum(a, b, c, d):
    led = total_energy(a, b, c, d)
    assert led.p_total == pytest.approx(a + b + c + d, rel=1e-12, abs=1e-300)
    assert (led + led).p_total == pytest.approx(2 * led.p_total, rel=1e-12, abs=1e-300)
    assert isinstance(led, EnergyLedger)
