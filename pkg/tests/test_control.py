from hypothesis import given, strategies as st
import numpy as np
import pytest

from open_oven.control import (
    ControllerState,
    PowerSchedule,
    Profile,
    first_order_response,
    identify_first_order,
    pid_step,
    profile_eval,
    simulate_first_order_loop,
    tune_pi,
)
from open_oven.errors import EmptyProfile

RAMP_HOLD = Profile(((0.0, 0.0), (100.0, 50.0), (170.0, 50.0)))


@pytest.mark.parametrize(
    "t, expected",
    [(-5.0, 0.0), (0.0, 0.0), (50.0, 25.0), (100.0, 50.0), (500.0, 50.0)],
)
def test_profile_interpolates_and_clamps(t, expected):
    assert profile_eval(RAMP_HOLD, t) == pytest.approx(expected)


def test_profile_rules():
    with pytest.raises(EmptyProfile):
        profile_eval(Profile(()), 1.0)
    with pytest.raises(ValueError):
        Profile(((0.0, 1.0), (0.0, 2.0)))
    assert RAMP_HOLD.duration == 170.0


def test_power_schedule_hold_replays_logged_values():
    trace = PowerSchedule(((0.0, 3.0), (1.0, 7.5), (2.0, 0.25)), hold=True)
    assert trace(0.0) == 3.0
    assert trace(0.999) == 3.0
    assert trace(1.0) == 7.5
    assert trace(10.0) == 0.25
    linear = PowerSchedule(((0.0, 0.0), (10.0, 10.0)))
    assert linear(2.5) == pytest.approx(2.5)
    assert PowerSchedule.constant(4.0)(123.0) == 4.0
    with pytest.raises(EmptyProfile):
        PowerSchedule(())(0.0)


def test_pid_clamps_and_stops_integrating_when_saturated():
    ctrl = ControllerState(kp=1.0, ki=1.0, u_max=10.0)
    u, ctrl = pid_step(ctrl, 100.0, 0.0, 1.0)
    assert u == 10.0
    assert ctrl.integral == 0.0
    u, ctrl = pid_step(ctrl, 0.0, 100.0, 1.0)
    assert u == 0.0
    assert ctrl.integral == 0.0


def test_pid_integrates_inside_limits():
    ctrl = ControllerState(kp=1.0, ki=1.0, integral=5.0, u_max=10.0)
    u, ctrl = pid_step(ctrl, 0.0, 2.0, 1.0)
    assert u == pytest.approx(3.0)
    assert ctrl.integral == pytest.approx(3.0)
    assert ctrl.prev_error == -2.0


def test_controller_limits_validated():
    with pytest.raises(ValueError):
        ControllerState(kp=1.0, ki=0.1, u_min=1.0)
    with pytest.raises(ValueError):
        ControllerState(kp=1.0, ki=0.1, u_max=-1.0)
    with pytest.raises(ValueError):
        pid_step(ControllerState(kp=1.0, ki=0.1), 1.0, 0.0, 0.0)


def test_identify_first_order_recovers_plant():
    times = np.linspace(0.0, 200.0, 201)
    rise = first_order_response(times, 4.0 * 5.0, 20.0)
    gain, tau = identify_first_order(times, rise, 5.0)
    assert gain == pytest.approx(4.0, rel=1e-4)
    assert tau == pytest.approx(20.0, rel=1e-4)
    with pytest.raises(ValueError):
        identify_first_order(times, rise, 0.0)


def test_tune_pi():
    kp, ki = tune_pi(4.0, 20.0)
    assert kp == pytest.approx(0.75)
    assert ki == pytest.approx(0.0375)
    kp, ki = tune_pi(2.0, 10.0, closed_loop_tau=5.0)
    assert kp == pytest.approx(1.0)
    assert ki == pytest.approx(0.1)
    with pytest.raises(ValueError):
        tune_pi(0.0, 1.0)


def test_tuned_loop_tracks_ramp_hold():
    kp, ki = tune_pi(4.0, 20.0)
    ctrl = ControllerState(kp=kp, ki=ki, u_max=25.0)
    ts, ys, us = simulate_first_order_loop(
        ctrl, 4.0, 20.0, lambda t: profile_eval(RAMP_HOLD, t), 170.0, 1.0
    )
    assert len(ts) == 171
    assert abs(ys[-1] - 50.0) < 0.5
    assert ys.max() < 52.0
    assert np.all((us >= 0.0) & (us <= 25.0))


@given(
    kp=st.floats(0.0, 100.0),
    ki=st.floats(0.0, 10.0),
    integral=st.floats(-1e3, 1e3),
    target=st.floats(200.0, 600.0),
    measured=st.floats(200.0, 600.0),
    u_max=st.floats(0.0, 50.0),
)
def test_pid_output_stays_within_limits(
    kp, ki, integral, target, measured, u_max
):
    ctrl = ControllerState(kp=kp, ki=ki, integral=integral, u_max=u_max)
    u, _ = pid_step(ctrl, target, measured, 1.0)
    assert 0.0 <= u <= u_max
