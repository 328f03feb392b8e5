"""Two-point visual driver control model, discretized for a fixed controller step.

Channels:
    anticipatory   T_ant = K_a * theta_far
    compensatory   T_com = K_c (T_L s + 1)/(T_I s + 1) applied to theta_near
                   after a T_P transport delay
    neuromuscular  T_dr  = 1/(T_N s + 1) applied to T_ant + T_com

Kinesthetic feedback of the steering-column angle is not modelled.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, fields


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class DriverParams:
    T_N: float = 0.12
    T_P: float = 0.06
    K_a: float = 30.0
    K_c: float = 10.0
    T_L: float = 2.8
    T_I: float = 0.18
    dt: float = 0.01
    # torque -> wheel angle mapping, not part of the driver model proper
    steer_gain: float = 0.012
    delta_max: float = 0.35

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ParameterError(f"{f.name} must be finite")
        for name in ("T_N", "T_L", "T_I", "dt", "delta_max"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.T_P < 0:
            raise ParameterError(f"T_P must be >= 0, got {self.T_P}")
        if self.dt > self.T_N / 10:
            raise ParameterError(
                f"dt={self.dt} too coarse: need dt <= T_N/10 = {self.T_N / 10:g}"
            )

    @property
    def delay_steps(self) -> int:
        return int(round(self.T_P / self.dt))


class FirstOrderSection:
    """(b1 s + b0) / (a1 s + a0) discretized with the bilinear transform.

    Runs in transposed direct form II, so the whole filter memory is a
    single scalar.
    """

    def __init__(self, b1: float, b0: float, a1: float, a0: float, dt: float):
        k = 2.0 / dt
        n1, n0 = b1 * k + b0, b0 - b1 * k
        d1, d0 = a1 * k + a0, a0 - a1 * k
        if d1 == 0:
            raise ParameterError("bilinear transform has a pole at z = infinity")
        self.num = (n1 / d1, n0 / d1)
        self.den = (1.0, d0 / d1)
        self.mem = 0.0

    def output(self, u: float) -> tuple[float, float]:
        """Return (y, next_mem) without committing the state."""
        y = self.num[0] * u + self.mem
        return y, self.num[1] * u - self.den[1] * y

    def step(self, u: float) -> float:
        y, self.mem = self.output(u)
        return y

    def reset(self):
        self.mem = 0.0


@dataclass
class SteerCommand:
    torque: float
    steer_angle: float


@dataclass
class ControllerState:
    params: DriverParams
    leadlag: FirstOrderSection = field(init=False, repr=False)
    neuromuscular: FirstOrderSection = field(init=False, repr=False)
    delay_buf: deque = field(init=False)
    last_T_dr: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.clear()

    def clear(self):
        p = self.params
        self.leadlag = FirstOrderSection(p.K_c * p.T_L, p.K_c, p.T_I, 1.0, p.dt)
        self.neuromuscular = FirstOrderSection(0.0, 1.0, p.T_N, 1.0, p.dt)
        n = p.delay_steps
        self.delay_buf = deque([0.0] * n, maxlen=n)
        self.last_T_dr = 0.0

    @property
    def leadlag_mem(self) -> float:
        return self.leadlag.mem

    @property
    def nm_mem(self) -> float:
        return self.neuromuscular.mem


def new_controller(params: DriverParams | None = None) -> ControllerState:
    return ControllerState(params if params is not None else DriverParams())


def reset(state: ControllerState) -> ControllerState:
    state.clear()
    return state


def step(state: ControllerState, theta_near: float, theta_far: float) -> SteerCommand:
    """Advance the driver model by one dt and return the steering command."""
    for name, val in (("theta_near", theta_near), ("theta_far", theta_far)):
        if not math.isfinite(val):
            raise ValueError(f"{name} is not finite: {val}")
        if abs(val) > math.pi:
            raise ValueError(f"|{name}| exceeds pi: {val}")
    p = state.params

    if state.delay_buf.maxlen:
        delayed = state.delay_buf[0]
    else:
        delayed = theta_near
    t_com, ll_mem = state.leadlag.output(delayed)
    t_ant = p.K_a * theta_far
    t_dr, nm_mem = state.neuromuscular.output(t_ant + t_com)

    # commit only after every stage succeeded
    if state.delay_buf.maxlen:
        state.delay_buf.append(float(theta_near))
    state.leadlag.mem = ll_mem
    state.neuromuscular.mem = nm_mem
    state.last_T_dr = t_dr

    steer = max(-p.delta_max, min(p.delta_max, p.steer_gain * t_dr))
    return SteerCommand(torque=t_dr, steer_angle=steer)
