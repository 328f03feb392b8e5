"""Quick invariant checks runnable from an installed package (`tpvdcm selftest`)."""
from __future__ import annotations

import math

import numpy as np

from . import controller as ctl
from .perception import CameraModel, project_world_point, unproject_pixel
from .sim import ScenarioConfig, run_scenario
from .vehicle import VehicleState


def _torques(params, near, far):
    st = ctl.new_controller(params)
    return np.array([ctl.step(st, n, f).torque for n, f in zip(near, far)])


def check_dc_gains() -> float:
    p = ctl.DriverParams()
    n = int(10 * max(p.T_N, p.T_I, p.T_L) / p.dt)
    worst = 0.0
    for tn, tf in ((0.1, 0.0), (0.0, 0.1), (0.05, -0.02)):
        tq = _torques(p, [tn] * n, [tf] * n)
        worst = max(worst, abs(tq[-1] - (p.K_c * tn + p.K_a * tf)))
    return worst


def check_delay() -> float:
    p = ctl.DriverParams(K_a=0.0)
    n = p.delay_steps
    tq = _torques(p, [1.0] + [0.0] * (n + 5), [0.0] * (n + 6))
    return float(np.abs(tq[:n]).max()) if n else 0.0


def check_lag() -> float:
    p = ctl.DriverParams(K_a=1.0, K_c=0.0, dt=0.001)
    n = 2000
    tq = _torques(p, [0.0] * n, [1.0] * n)
    t = np.arange(n) * p.dt
    return float(np.abs(tq - (1 - np.exp(-t / p.T_N))).max())


def check_linearity() -> float:
    rng = np.random.default_rng(1)
    p = ctl.DriverParams()
    a1, a2 = rng.uniform(-0.3, 0.3, (2, 1000)), rng.uniform(-0.3, 0.3, (2, 1000))
    r1 = _torques(p, *a1)
    r2 = _torques(p, *a2)
    r12 = _torques(p, *(0.7 * a1 + 0.3 * a2))
    return float(np.abs(r12 - (0.7 * r1 + 0.3 * r2)).max())


def check_round_trip() -> float:
    rng = np.random.default_rng(2)
    cam = CameraModel.from_fov()
    pose = VehicleState(3.0, -2.0, 0.7, 0.0)
    worst = 0.0
    for _ in range(1000):
        u, v = rng.uniform(0, cam.width), rng.uniform(0, cam.height)
        q = unproject_pixel(cam, pose, u, v, rng.uniform(0.5, 50))
        pu, pv = project_world_point(cam, pose, q)
        worst = max(worst, abs(pu - u), abs(pv - v))
    return worst


def check_determinism() -> float:
    cfg = ScenarioConfig(laps=1, rng_seed=3)
    a, _ = run_scenario(cfg)
    b, _ = run_scenario(cfg)
    return 0.0 if a.rows == b.rows else math.inf


CHECKS = [
    ("controller DC gains", check_dc_gains, 1e-6),
    ("controller pure delay", check_delay, 0.0),
    ("neuromuscular lag vs analytic", check_lag, 0.01),
    ("controller superposition", check_linearity, 1e-9),
    ("projection round trip [px]", check_round_trip, 1e-6),
    ("one-lap determinism", check_determinism, 0.0),
]


def run_selftest(out=print) -> bool:
    ok = True
    for name, fn, tol in CHECKS:
        err = fn()
        passed = err <= tol
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}: error {err:.3g} (tol {tol:g})")
    return ok
