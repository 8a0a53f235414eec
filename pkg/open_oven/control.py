"""Temperature profiles, power schedules and the PI(D) power controller."""

from bisect import bisect_right
from dataclasses import dataclass, replace
import logging
import math

import numpy as np
from scipy.optimize import curve_fit

from .const import DEFAULT_U_MAX
from .errors import EmptyProfile

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Profile:
    """Piecewise-linear target temperature (K) over time (s)."""

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        """Times must be strictly increasing."""
        times = [t for t, _ in self.breakpoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("profile times must be strictly increasing")

    @property
    def duration(self) -> float:
        """Time of the last breakpoint."""
        if not self.breakpoints:
            raise EmptyProfile("profile has no breakpoints")
        return self.breakpoints[-1][0]


def profile_eval(profile: Profile, t: float) -> float:
    """Target at t, clamped to the end values outside the breakpoints."""
    if not profile.breakpoints:
        raise EmptyProfile("profile has no breakpoints")
    times = [p[0] for p in profile.breakpoints]
    values = [p[1] for p in profile.breakpoints]
    return float(np.interp(t, times, values))


@dataclass(frozen=True)
class PowerSchedule:
    """Delivered power (W) over time, linear or zero-order hold.

    Zero-order hold replays a logged trace exactly: the value at a
    logged time is the logged value.
    """

    breakpoints: tuple[tuple[float, float], ...]
    hold: bool = False

    def __call__(self, t: float) -> float:
        """Power at time t."""
        if not self.breakpoints:
            raise EmptyProfile("power schedule has no breakpoints")
        times = [p[0] for p in self.breakpoints]
        if self.hold:
            i = max(bisect_right(times, t) - 1, 0)
            return self.breakpoints[i][1]
        values = [p[1] for p in self.breakpoints]
        return float(np.interp(t, times, values))

    @classmethod
    def constant(cls, power: float) -> "PowerSchedule":
        """The same power forever."""
        return cls(((0.0, float(power)),), hold=True)


@dataclass(frozen=True)
class ControllerState:
    """PI(D) gains, limits and memory."""

    kp: float
    ki: float
    kd: float = 0.0
    integral: float = 0.0
    prev_error: float | None = None
    u_min: float = 0.0
    u_max: float = DEFAULT_U_MAX

    def __post_init__(self) -> None:
        """Output limits must satisfy 0 = u_min <= u_max."""
        if self.u_min != 0.0 or self.u_max < self.u_min:
            raise ValueError("controller limits need u_min = 0 <= u_max")


def pid_step(
    ctrl: ControllerState, target: float, measured: float, dt: float
) -> tuple[float, ControllerState]:
    """Power command and the updated controller.

    The integral only accumulates while the unclamped command is inside
    the limits, or when the error pulls it back toward them.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    error = target - measured
    prev = error if ctrl.prev_error is None else ctrl.prev_error
    derivative = (error - prev) / dt
    u_raw = ctrl.kp * error + ctrl.ki * ctrl.integral + ctrl.kd * derivative
    u = min(max(u_raw, ctrl.u_min), ctrl.u_max)

    saturated_high = u_raw > ctrl.u_max and error > 0
    saturated_low = u_raw < ctrl.u_min and error < 0
    integral = ctrl.integral
    if not (saturated_high or saturated_low):
        integral += error * dt
    return u, replace(ctrl, integral=integral, prev_error=error)


def first_order_response(t, gain, tau, t0=0.0):
    """Step response y(t) = gain (1 - exp(-(t - t0)/tau)) for t >= t0."""
    t = np.asarray(t, dtype=float)
    return np.where(t > t0, gain * (1.0 - np.exp(-(t - t0) / tau)), 0.0)


def identify_first_order(times, rise, step_power: float):
    """Fit (K in K/W, tau in s) to an open-loop step response.

    rise is the temperature above the starting value.
    """
    times = np.asarray(times, dtype=float)
    rise = np.asarray(rise, dtype=float)
    if step_power <= 0:
        raise ValueError("step power must be > 0")
    final = float(rise[-1])
    guess_tau = max(float(times[-1]) / 3.0, 1e-6)
    (gain, tau), _ = curve_fit(
        lambda t, g, tau: first_order_response(t, g, tau),
        times,
        rise,
        p0=(max(final, 1e-9) * 1.5, guess_tau),
        bounds=((0.0, 1e-9), (np.inf, np.inf)),
        maxfev=20000,
    )
    _LOGGER.info(
        "Step test: gain %.4g K/W, time constant %.4g s",
        gain / step_power, tau,
    )
    return gain / step_power, tau


def tune_pi(
    gain: float, tau: float, closed_loop_tau: float | None = None
) -> tuple[float, float]:
    """SIMC/IMC PI gains for a first-order lag.

    kp = tau / (K lambda), ki = kp / tau; lambda defaults to tau / 3.
    """
    if gain <= 0 or tau <= 0:
        raise ValueError("plant gain and time constant must be > 0")
    lam = closed_loop_tau if closed_loop_tau else tau / 3.0
    kp = tau / (gain * lam)
    return kp, kp / tau


def simulate_first_order_loop(
    ctrl: ControllerState,
    gain: float,
    tau: float,
    target,
    t_end: float,
    dt: float,
    y0: float = 0.0,
):
    """Closed loop around y' = (K u - y)/tau, exact zero-order-hold plant.

    target is a constant or a callable of time. Returns (t, y, u) arrays.
    """
    decay = math.exp(-dt / tau)
    n = int(round(t_end / dt))
    ts = np.arange(n + 1) * dt
    ys = np.empty(n + 1)
    us = np.zeros(n + 1)
    y = y0
    ys[0] = y
    for i in range(n):
        ref = target(ts[i]) if callable(target) else target
        u, ctrl = pid_step(ctrl, ref, y, dt)
        y = gain * u + (y - gain * u) * decay
        us[i] = u
        ys[i + 1] = y
    us[n] = us[n - 1] if n else 0.0
    return ts, ys, us
