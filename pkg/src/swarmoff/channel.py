"""Free-space path-loss uplink model and the mobility-coupled upload delay.

The upload duration of an n-bit task from a moving robot solves

    integral_0^T  B * log2(1 + P_tra * h(dist(t)) / sigma^2) dt = n

with dist(t) the robot-to-server distance along the exact reflected
trajectory. The integrand is smooth, positive and bounded below by the rate
at the plane's far corner, so the balance equation always has a unique
finite root; it is found by safeguarded Newton on an adaptive-Simpson
cumulative integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .mobility import Plane, advance
from .model import RobotState

# Relative tolerance of the bit-balance residual at the returned delay.
_BALANCE_RTOL = 1e-10
_MAX_SIMPSON_DEPTH = 40


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_B: float = 1e6  # Hz
    noise_power_sigma2: float = 1e-13  # watts
    gain_ref_g0: float = 1e-4  # channel gain at the 1 m reference distance
    min_distance: float = 0.5  # meters; clamp against the inverse-square singularity

    def validate(self) -> None:
        for name in ("bandwidth_B", "noise_power_sigma2", "gain_ref_g0", "min_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"channel parameter {name} must be strictly positive")


def channel_gain(dist: float, cp: ChannelParams) -> float:
    """Free-space (inverse-square) gain, clamped below min_distance."""
    d = max(dist, cp.min_distance)
    return cp.gain_ref_g0 / (d * d)


def instantaneous_rate(dist: float, p_tra: float, cp: ChannelParams) -> float:
    """Shannon uplink rate in bits/second at the given distance."""
    snr = p_tra * channel_gain(dist, cp) / cp.noise_power_sigma2
    return cp.bandwidth_B * math.log2(1.0 + snr)


def _rate_at(state: RobotState, t: float, plane: Plane, p_tra: float, cp: ChannelParams) -> float:
    x, y = advance(state, t, plane).l
    sx, sy = plane.server_pos
    return instantaneous_rate(math.hypot(x - sx, y - sy), p_tra, cp)


def _simpson(f, a: float, fa: float, m: float, fm: float, b: float, fb: float) -> float:
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_simpson(f, a, fa, m, fm, b, fb, whole, tol, depth) -> float:
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, lm, flm, m, fm)
    right = _simpson(f, m, fm, rm, frm, b, fb)
    if depth >= _MAX_SIMPSON_DEPTH or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adaptive_simpson(f, a, fa, lm, flm, m, fm, left, tol / 2.0, depth + 1) + _adaptive_simpson(
        f, m, fm, rm, frm, b, fb, right, tol / 2.0, depth + 1
    )


def _integrate(f, a: float, b: float, tol: float) -> float:
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(f, a, fa, m, fm, b, fb)
    return _adaptive_simpson(f, a, fa, m, fm, b, fb, whole, tol, 0)


def _corner_distance(plane: Plane) -> float:
    sx, sy = plane.server_pos
    dx = max(sx, plane.edge - sx)
    dy = max(sy, plane.edge - sy)
    return math.hypot(dx, dy)


def transmission_delay(
    task_n: float,
    robot: RobotState,
    plane: Plane,
    p_tra: float,
    cp: ChannelParams,
) -> float:
    """Upload duration for task_n bits along the robot's trajectory.

    Stationary robots reduce to the closed form n / rate(distance); moving
    robots solve the bit-balance equation to _BALANCE_RTOL relative accuracy.
    """
    if task_n <= 0:
        raise ValueError("task_n must be positive")
    rate0 = _rate_at(robot, 0.0, plane, p_tra, cp)
    if robot.speed == 0.0:
        return task_n / rate0

    def rate(t: float) -> float:
        return _rate_at(robot, t, plane, p_tra, cp)

    int_tol = _BALANCE_RTOL * task_n * 0.1
    rate_floor = instantaneous_rate(_corner_distance(plane), p_tra, cp)

    # Bracket the root: upper bound from the worst rate anywhere on the plane.
    lo, f_lo = 0.0, -task_n
    hi = task_n / rate0
    hi_cap = task_n / rate_floor
    f_hi = _integrate(rate, 0.0, hi, int_tol) - task_n
    while f_hi < 0.0:
        if hi >= hi_cap:
            hi = hi_cap * (1.0 + 1e-12)
            f_hi = _integrate(rate, 0.0, hi, int_tol) - task_n
            break
        lo, f_lo = hi, f_hi
        hi = min(hi * 2.0, hi_cap)
        f_hi = _integrate(rate, 0.0, hi, int_tol) - task_n

    # Safeguarded Newton on F(T) - n; F' = rate > 0.
    t = hi if f_hi <= 0.0 else 0.5 * (lo + hi)
    f_t = _integrate(rate, 0.0, t, int_tol) - task_n
    for _ in range(100):
        if abs(f_t) <= _BALANCE_RTOL * task_n:
            return t
        if f_t > 0.0:
            hi, f_hi = t, f_t
        else:
            lo, f_lo = t, f_t
        step = t - f_t / rate(t)
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        t, f_t = step, _integrate(rate, 0.0, step, int_tol) - task_n
    return t
