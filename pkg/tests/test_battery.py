import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridres.battery import (BatterySpec, BatteryState, BoundViolation, feasible_range, mean_soc,
                             simulate, soc, step)
from strategies import batteries, finite

B = BatterySpec(b_min=0.0, b_max=100.0, b_rated=100.0, delta_max=40.0, delta_min=-40.0,
                eta_ch=0.95, eta_dis=0.95)


def test_step_examples():
    assert step(B, 50.0, 0.0) == 50.0
    assert step(B, 50.0, 10.0) == pytest.approx(59.5)
    assert step(B, 50.0, -10.0) == pytest.approx(50.0 - 10.0 / 0.95)
    assert step(B, 50.0, -10.0) == pytest.approx(39.4737, abs=1e-4)


def test_step_bound_violation():
    with pytest.raises(BoundViolation) as e:
        step(B, 90.0, 20.0)
    assert e.value.side == "upper"
    with pytest.raises(BoundViolation):
        step(B, 5.0, -10.0)


def test_feasible_range_examples():
    assert feasible_range(B, 100.0, 1.0)[1] == 0.0
    assert feasible_range(B, 0.0, 1.0)[0] == 0.0
    assert feasible_range(B, 50.0, 1.0)[1] == 40.0
    lo, hi = feasible_range(B, 50.0, 0.25)
    assert (lo, hi) == (-10.0, 10.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        BatterySpec(0.0, 100.0, 50.0, 10.0, -10.0)
    with pytest.raises(ValueError):
        BatterySpec(0.0, 100.0, 100.0, 10.0, 10.0)
    with pytest.raises(ValueError):
        BatterySpec(0.0, 100.0, 100.0, 10.0, -10.0, eta_ch=1.2)
    with pytest.raises(ValueError):
        BatterySpec.from_c_rating(0.0)


def test_c_rating():
    bt = BatterySpec.from_c_rating(500.0)
    assert (bt.b_min, bt.b_max, bt.b_rated, bt.delta_max, bt.delta_min) == (0, 500, 500, 500, -500)
    assert bt.s_min(1 / 12) <= 0 <= bt.s_max(1 / 12)
    assert bt.scaled(2.0).b_rated == 1000.0


def test_mean_soc_examples():
    assert mean_soc([0.5, 0.5, 0.5]) == 0.5
    assert mean_soc([0.4, 0.8]) == pytest.approx(0.6)
    assert mean_soc([BatteryState(10.0, 0.1), BatteryState(30.0, 0.3)]) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        mean_soc([])


@given(batteries(), st.floats(0, 1, **finite), st.floats(0, 1, **finite),
       st.sampled_from([1.0, 0.25, 1 / 12]))
@settings(max_examples=300)
def test_range_admits_zero_and_is_feasible(bt, frac, pick, h):
    b = bt.b_min + frac * (bt.b_max - bt.b_min)
    lo, hi = feasible_range(bt, b, h)
    assert lo <= 0.0 <= hi
    step(bt, b, lo + pick * (hi - lo))


@given(batteries(), st.floats(0, 1, **finite), st.floats(-1e3, 1e3, **finite),
       st.floats(-1e3, 1e3, **finite))
@settings(max_examples=300)
def test_step_monotone(bt, frac, s1, s2):
    b = bt.b_min + frac * (bt.b_max - bt.b_min)
    lo, hi = feasible_range(bt, b, 1.0)
    a, c = sorted([np.clip(s1, lo, hi), np.clip(s2, lo, hi)])
    assert step(bt, b, a) <= step(bt, b, c)


def test_simulate_projection_and_soc():
    s, b = simulate(B, 50.0, [100.0, -500.0, 0.0], 1.0, project=True)
    # charge capped by power, discharge by power too (88 MWh stored)
    np.testing.assert_allclose(s, [40.0, -40.0, 0.0])
    assert b[1] == pytest.approx(88.0 - 40.0 / 0.95)
    s, b = simulate(B, 10.0, [-100.0], 1.0, project=True)
    assert s[0] == pytest.approx(-9.5) and b[0] == 0.0
    np.testing.assert_allclose(soc(B, b), b / 100.0)
    with pytest.raises(BoundViolation):
        simulate(B, 50.0, [100.0], 1.0)
