"""Kinematic bicycle plant and longitudinal speed PID."""
from __future__ import annotations

import math
from dataclasses import dataclass


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    v: float = 0.0


def vehicle_step(
    s: VehicleState, steer: float, accel: float, dt: float, wheelbase: float = 0.57
) -> VehicleState:
    """One forward-Euler step; position and heading use the speed at the start of the step."""
    for name, val in (("steer", steer), ("accel", accel), ("dt", dt), ("wheelbase", wheelbase)):
        if not math.isfinite(val):
            raise ValueError(f"{name} is not finite: {val}")
    if dt <= 0 or wheelbase <= 0:
        raise ValueError("dt and wheelbase must be positive")
    return VehicleState(
        x=s.x + s.v * math.cos(s.psi) * dt,
        y=s.y + s.v * math.sin(s.psi) * dt,
        psi=wrap_angle(s.psi + s.v / wheelbase * math.tan(steer) * dt),
        v=max(0.0, s.v + accel * dt),
    )


@dataclass
class PidState:
    kp: float = 2.0
    ki: float = 0.5
    kd: float = 0.0
    integ_max: float = 0.2
    a_max: float = 4.0
    integ: float = 0.0
    prev_err: float = 0.0

    def reset(self):
        self.integ = 0.0
        self.prev_err = 0.0


def speed_pid_step(pid: PidState, v_target: float, v: float, dt: float) -> float:
    if dt <= 0:
        raise ValueError("dt must be positive")
    e = v_target - v
    pid.integ = max(-pid.integ_max, min(pid.integ_max, pid.integ + e * dt))
    deriv = (e - pid.prev_err) / dt
    pid.prev_err = e
    a = pid.kp * e + pid.ki * pid.integ + pid.kd * deriv
    return max(-pid.a_max, min(pid.a_max, a))

