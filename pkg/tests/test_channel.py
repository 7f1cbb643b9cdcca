import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarmoff.channel import (
    ChannelParams,
    channel_gain,
    instantaneous_rate,
    transmission_delay,
)
from swarmoff.mobility import Plane, advance
from swarmoff.model import RobotState
from swarmoff.verify import trapezoid_delay_oracle

CP = ChannelParams()
PLANE = Plane(edge=30.0)
P_TRA = 0.05


def test_gain_at_reference_distance():
    assert channel_gain(1.0, CP) == pytest.approx(CP.gain_ref_g0)


def test_gain_inverse_square():
    assert channel_gain(2.0, CP) == pytest.approx(CP.gain_ref_g0 / 4.0)


def test_gain_clamped_at_zero_distance():
    assert channel_gain(0.0, CP) == pytest.approx(CP.gain_ref_g0 / CP.min_distance**2)
    assert math.isfinite(channel_gain(0.0, CP))


def test_rate_vanishes_with_power():
    assert instantaneous_rate(5.0, 1e-30, CP) == pytest.approx(0.0, abs=1e-10)


def test_rate_equals_bandwidth_at_unit_snr():
    # pick a distance where p*h/sigma^2 == 1
    d = math.sqrt(P_TRA * CP.gain_ref_g0 / CP.noise_power_sigma2)
    cp = ChannelParams(min_distance=1e-6)
    assert instantaneous_rate(d, P_TRA, cp) == pytest.approx(cp.bandwidth_B, rel=1e-12)


def test_rate_non_increasing_in_distance():
    rates = [instantaneous_rate(d, P_TRA, CP) for d in np.linspace(0.0, 50.0, 200)]
    assert all(a >= b - 1e-9 for a, b in zip(rates, rates[1:]))
    assert all(r > 0 for r in rates)


def _robot(x, y, theta, speed):
    return RobotState(robot_id=0, l=(x, y), v=(math.cos(theta), math.sin(theta)), speed=speed)


def test_stationary_matches_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = rng.uniform(0, 30, size=2)
        n = rng.uniform(1.2e5, 3e5)
        robot = _robot(x, y, 0.3, speed=0.0)
        dist = max(math.hypot(x - 15.0, y - 15.0), CP.min_distance)
        rate = CP.bandwidth_B * math.log2(1 + P_TRA * CP.gain_ref_g0 / dist**2 / CP.noise_power_sigma2)
        assert transmission_delay(n, robot, PLANE, P_TRA, CP) == pytest.approx(
            n / rate, rel=1e-12
        )


def test_stationary_delay_linear_in_bits():
    robot = _robot(4.0, 9.0, 1.0, speed=0.0)
    one = transmission_delay(1.5e5, robot, PLANE, P_TRA, CP)
    two = transmission_delay(3.0e5, robot, PLANE, P_TRA, CP)
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_moving_matches_trapezoid_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        x, y = rng.uniform(0, 30, size=2)
        robot = _robot(x, y, rng.uniform(0, 2 * math.pi), speed=rng.uniform(0.5, 4.0))
        n = rng.uniform(1.2e5, 3e5)
        got = transmission_delay(n, robot, PLANE, P_TRA, CP)
        oracle = trapezoid_delay_oracle(n, robot, PLANE, P_TRA, CP)
        assert got == pytest.approx(oracle, rel=1e-6)


def test_bit_balance_residual_at_solution():
    # re-integrating the rate over [0, T*] must recover the task size
    rng = np.random.default_rng(3)
    sx, sy = PLANE.server_pos
    for _ in range(10):
        robot = _robot(rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(0, 6.28), 2.0)
        n = rng.uniform(1.2e5, 3e5)
        t_star = transmission_delay(n, robot, PLANE, P_TRA, CP)
        # high-resolution Simpson re-evaluation on a fine uniform grid
        ts = np.linspace(0.0, t_star, 20_001)
        rates = np.array(
            [
                instantaneous_rate(
                    math.hypot(*(np.array(advance(robot, t, PLANE).l) - (sx, sy))), P_TRA, CP
                )
                for t in ts
            ]
        )
        simps = (t_star / (len(ts) - 1)) / 3.0 * (
            rates[0] + rates[-1] + 4 * rates[1:-1:2].sum() + 2 * rates[2:-1:2].sum()
        )
        assert simps == pytest.approx(n, rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(
    n1=st.floats(min_value=5e4, max_value=2e5),
    extra=st.floats(min_value=1e3, max_value=2e5),
    x=st.floats(min_value=0.0, max_value=30.0),
    y=st.floats(min_value=0.0, max_value=30.0),
    theta=st.floats(min_value=0.0, max_value=2 * math.pi),
)
def test_delay_strictly_increasing_in_bits(n1, extra, x, y, theta):
    robot = _robot(x, y, theta, speed=2.0)
    assert transmission_delay(n1 + extra, robot, PLANE, P_TRA, CP) > transmission_delay(
        n1, robot, PLANE, P_TRA, CP
    )


def test_bracketing_by_extreme_rates():
    robot = _robot(2.0, 3.0, 0.7, speed=3.0)
    n = 2.5e5
    t_star = transmission_delay(n, robot, PLANE, P_TRA, CP)
    # rate at the min-distance clamp bounds from above; corner distance below
    r_max = instantaneous_rate(CP.min_distance, P_TRA, CP)
    r_min = instantaneous_rate(math.hypot(15.0, 15.0), P_TRA, CP)
    assert n / r_max <= t_star <= n / r_min
