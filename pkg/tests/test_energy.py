import math

import pytest
from hypothesis import given, strategies as st

from uavee.config import EnergyParams
from uavee.energy import BatteryState, consume, propulsion_power, step_energy, total_system_ee

PAPER = EnergyParams()
CORRECTED = EnergyParams(power_model_sign="corrected")

# reference values computed at 30 significant digits with mpmath
P10_PAPER = 313.248887938599679
P20_PAPER = 598.717095429709742
P10_CORRECTED = 125.780853440387815


def test_hover_power():
    assert propulsion_power(0.0, PAPER) == pytest.approx(168.48, abs=1e-9)


@pytest.mark.parametrize("v, params, expected", [
    (10.0, PAPER, P10_PAPER),
    (20.0, PAPER, P20_PAPER),
    (10.0, CORRECTED, P10_CORRECTED),
])
def test_power_against_reference(v, params, expected):
    assert propulsion_power(v, params) == pytest.approx(expected, rel=1e-12)


def test_parasite_term_contribution_at_20():
    no_parasite = EnergyParams(kappa2=1e-300)
    assert propulsion_power(20.0, PAPER) - propulsion_power(20.0, no_parasite) == pytest.approx(72.0, rel=1e-12)


def test_sign_variants_agree_at_hover():
    assert propulsion_power(0.0, CORRECTED) == propulsion_power(0.0, PAPER)


def test_negative_speed_rejected():
    with pytest.raises(ValueError):
        propulsion_power(-1.0, PAPER)


def test_step_energy():
    assert step_energy(0.0, 1.0, PAPER) == pytest.approx(168.48, abs=1e-9)
    assert step_energy(0.0, 2.0, PAPER) == pytest.approx(336.96, abs=1e-9)
    assert step_energy(10.0, 1.0, PAPER) == propulsion_power(10.0, PAPER)
    with pytest.raises(ValueError):
        step_energy(0.0, 0.0, PAPER)


def test_power_grows_without_bound():
    for params in (PAPER, CORRECTED):
        values = [propulsion_power(v, params) for v in (50, 100, 200, 400)]
        assert values == sorted(values)
        assert values[-1] > 0.5 * 0.018 * 400 ** 3


def test_corrected_model_dips_below_hover_at_low_speed():
    assert min(propulsion_power(v, CORRECTED) for v in range(1, 20)) < propulsion_power(0.0, CORRECTED)


def test_consume_kills_at_capacity():
    b = consume(BatteryState(1000.0), 1000.0)
    assert not b.alive and b.consumed == 1000.0


def test_consume_zero():
    b0 = BatteryState(1000.0, consumed=10.0, last_step_energy=5.0)
    b1 = consume(b0, 0.0)
    assert (b1.capacity, b1.consumed, b1.alive, b1.last_step_energy) == (1000.0, 10.0, True, 0.0)


def test_consume_rejects_negative():
    with pytest.raises(ValueError):
        consume(BatteryState(1.0), -1.0)


def test_hover_budget_over_an_episode():
    b = BatteryState(16.0 * 22.2 * 3600.0)
    e = step_energy(0.0, 1.0, PAPER)
    for _ in range(1500):
        b = consume(b, e)
    assert b.consumed == pytest.approx(252_720.0, rel=1e-12)
    assert b.alive


@given(st.lists(st.floats(0, 500), min_size=1, max_size=50))
def test_battery_is_monotone(draws):
    b = BatteryState(2000.0)
    was_dead = False
    prev = 0.0
    for e in draws:
        b = consume(b, e)
        assert b.consumed >= prev
        prev = b.consumed
        if was_dead:
            assert not b.alive
        was_dead = not b.alive
        assert b.alive == (b.consumed < b.capacity)


def test_total_system_ee():
    assert total_system_ee(1e7, 10 * 168.48) == pytest.approx(5935.42260208927, rel=1e-12)
    assert total_system_ee(0.0, 5.0) == 0.0
    assert total_system_ee(2e7, 10 * 168.48) == pytest.approx(2 * total_system_ee(1e7, 10 * 168.48))
    with pytest.raises(ValueError):
        total_system_ee(1.0, 0.0)
