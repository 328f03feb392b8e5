"""Closed-loop scenario runner for the three driving experiments."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from .perception import (
    CameraModel,
    ExtractionError,
    bearing_from_bbox,
    bounding_box_from_pose,
    cost_rows,
    ground_truth_angles,
    row_angle,
    row_min_column,
)
from .track import Track, build_oval_track, nearest_centerline_point
from .vehicle import PidState, VehicleState, speed_pid_step, vehicle_step

EXPERIMENTS = ("baseline", "costmap", "vehicle_follow")
CSV_HEADER = ["t", "x", "y", "psi", "v", "theta_near", "theta_far", "steer_cmd", "lat_err"]


@dataclass
class TrackParams:
    outer_diameter: float = 30.0
    aspect_ratio: float = 0.75
    half_width: float = 1.5
    spacing: float = 0.05


@dataclass
class VehicleParams:
    wheelbase: float = 0.57
    kp: float = 2.0
    ki: float = 0.5
    kd: float = 0.0
    integ_max: float = 0.2
    a_max: float = 4.0


@dataclass
class LeadParams:
    gap: float = 5.0
    speed: float = 4.0
    amplitude: float = 0.4
    harmonics: int = 3
    length: float = 0.9
    width: float = 0.5
    height: float = 0.4
    dropout_hold: float = 0.5


@dataclass
class CameraParams:
    fov_deg: float = 70.0
    width: int = 416
    height: int = 416
    mount_height: float = 0.2

    def model(self) -> CameraModel:
        return CameraModel.from_fov(math.radians(self.fov_deg), self.width, self.height, self.mount_height)


@dataclass
class PerceptionParams:
    l_n: float = 1.0
    l_f: float = 3.0
    near_rows: int = 15
    far_rows: int = 45
    # 0 means refresh every controller step
    costmap_rate_hz: float = 40.0
    detection_rate_hz: float = 13.0


@dataclass
class ScenarioConfig:
    experiment: str = "baseline"
    laps: int = 5
    v_target: float = 4.0
    dt: float = 0.01
    rng_seed: int = 0
    # start at a seeded random centerline point instead of index 0
    random_start: bool = True
    max_time: float = 0.0  # 0 -> derived from laps and v_target
    driver: ctl.DriverParams = field(default_factory=ctl.DriverParams)
    track: TrackParams = field(default_factory=TrackParams)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    lead: LeadParams = field(default_factory=LeadParams)
    camera: CameraParams = field(default_factory=CameraParams)
    perception: PerceptionParams = field(default_factory=PerceptionParams)


@dataclass
class TrajectoryLog:
    rows: list = field(default_factory=list)
    lap_indices: list = field(default_factory=list)
    collided: bool = False
    seed: int = 0
    # lead pose per row, vehicle_follow only; not part of the CSV
    lead: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[CSV_HEADER.index(name)] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)


@dataclass
class Metrics:
    mean_abs_lat_err: float
    std_lat_err: float
    collided: bool
    laps_completed: int


class ScenarioFailure(RuntimeError):
    """Feature extraction failed mid-run; the partial log and metrics are attached."""

    def __init__(self, msg, log: TrajectoryLog, metrics: Metrics | None):
        super().__init__(msg)
        self.log = log
        self.metrics = metrics


# ----------------------------------------------------------------- lead vehicle


class LeadScript:
    """Lead vehicle driving the centerline at constant speed with a smooth lateral wobble.

    The wobble is a sum of sinusoids with integer cycles per lap, so it is
    periodic in the lap time. Amplitudes sum to `amplitude`, which bounds
    the offset.
    """

    def __init__(self, track: Track, s0: float, speed: float, amplitude: float, harmonics: int, rng):
        self.track = track
        self.s0 = s0
        self.speed = speed
        if amplitude > 0 and harmonics > 0:
            cycles = rng.choice(np.arange(2, 7), size=harmonics, replace=harmonics > 5)
            weights = rng.uniform(0.2, 1.0, size=harmonics)
            self.amps = amplitude * weights / weights.sum()
            self.k = 2 * math.pi * cycles / track.perimeter
            self.phase = rng.uniform(0, 2 * math.pi, size=harmonics)
        else:
            self.amps = self.k = self.phase = np.zeros(0)

    @property
    def lap_time(self) -> float:
        return self.track.perimeter / self.speed

    def offset(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)[..., None]
        return np.sum(self.amps * np.sin(self.k * s + self.phase), axis=-1)

    def offset_slope(self, s: float) -> float:
        return float(np.sum(self.amps * self.k * np.cos(self.k * s + self.phase)))

    def pose(self, t: float) -> VehicleState:
        if t < 0:
            raise ValueError("t must be >= 0")
        s = self.s0 + self.speed * t
        p, tan = self.track.point_at(s)
        off = float(self.offset(s))
        x = p[0] - tan[1] * off
        y = p[1] + tan[0] * off
        psi = math.atan2(tan[1], tan[0]) + math.atan(self.offset_slope(s))
        return VehicleState(x, y, math.remainder(psi, 2 * math.pi), self.speed)


def lead_vehicle_step(script: LeadScript, t: float) -> VehicleState:
    return script.pose(t)


# --------------------------------------------------------------------- metrics


def compute_metrics(log: TrajectoryLog) -> Metrics:
    if len(log) == 0:
        raise ValueError("empty trajectory log")
    err = np.abs(log.column("lat_err"))
    return Metrics(
        mean_abs_lat_err=float(err.mean()),
        std_lat_err=float(err.std()),
        collided=log.collided,
        laps_completed=len(log.lap_indices),
    )


def write_trajectory_csv(log: TrajectoryLog, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in log.rows:
            w.writerow([repr(float(v)) for v in r])


def format_metrics(m: Metrics, seed: int) -> str:
    return (
        f"mean_abs_lat_err={m.mean_abs_lat_err!r}\n"
        f"std_lat_err={m.std_lat_err!r}\n"
        f"laps_completed={m.laps_completed}\n"
        f"collided={str(m.collided).lower()}\n"
        f"seed={seed}\n"
    )


# -------------------------------------------------------------------- runner


class _Sampler:
    """Zero-order hold: refresh a measurement only on sensor ticks."""

    def __init__(self, rate_hz: float, dt: float):
        self.rate = rate_hz
        self.dt = dt
        self.last_tick = None

    def due(self, k: int) -> bool:
        if self.rate <= 0:
            return True
        tick = math.floor(k * self.dt * self.rate + 1e-9)
        if tick != self.last_tick:
            self.last_tick = tick
            return True
        return False


def validate_config(cfg: ScenarioConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if cfg.laps < 1:
        raise ValueError("laps must be >= 1")
    if not cfg.dt > 0:
        raise ValueError("dt must be > 0")
    if not cfg.v_target > 0:
        raise ValueError("v_target must be > 0")
    if cfg.driver.dt != cfg.dt:
        raise ValueError("driver.dt must equal the scenario dt")
    p = cfg.perception
    if not 0 < p.l_n < p.l_f:
        raise ValueError("need 0 < l_n < l_f")
    if not 0 < p.near_rows < p.far_rows:
        raise ValueError("need 0 < near_rows < far_rows")
    if cfg.lead.amplitude < 0 or cfg.lead.gap <= 0 or cfg.lead.speed <= 0:
        raise ValueError("lead amplitude must be >= 0, gap and speed > 0")


def run_scenario(cfg: ScenarioConfig, track: Track | None = None) -> tuple[TrajectoryLog, Metrics]:
    """Drive `cfg.laps` laps counter-clockwise and log every controller step.

    Stops early on leaving the lane (reported through Metrics.collided) and
    raises ScenarioFailure when a feature extractor loses the lane or lead.
    """
    validate_config(cfg)
    if track is None:
        tp = cfg.track
        track = build_oval_track(tp.outer_diameter, tp.aspect_ratio, tp.half_width, tp.spacing)
    rng = np.random.default_rng(cfg.rng_seed)
    dt = cfg.dt
    per = cfg.perception

    driver = ctl.new_controller(cfg.driver)
    vp = cfg.vehicle
    pid = PidState(vp.kp, vp.ki, vp.kd, vp.integ_max, vp.a_max)
    i0 = int(rng.integers(len(track))) if cfg.random_start else 0
    tan0 = track.tangents[i0]
    state = VehicleState(*track.centerline[i0], math.atan2(tan0[1], tan0[0]), 0.0)

    lead = None
    cam = None
    if cfg.experiment == "vehicle_follow":
        lp = cfg.lead
        lead = LeadScript(track, track.arclength[i0] + lp.gap, lp.speed, lp.amplitude, lp.harmonics, rng)
        cam = cfg.camera.model()
        lead_dims = (lp.length, lp.width, lp.height)

    costmap_clock = _Sampler(per.costmap_rate_hz, dt)
    detect_clock = _Sampler(per.detection_rate_hz, dt)
    held_near = held_far = 0.0
    last_detection_t = 0.0

    log = TrajectoryLog(seed=cfg.rng_seed)
    perimeter = track.perimeter
    progress = 0.0
    prev_s = track.arclength[i0]
    max_time = cfg.max_time or 3.0 * cfg.laps * perimeter / cfg.v_target + 30.0
    n_steps = int(math.ceil(max_time / dt))

    def fail(msg):
        metrics = compute_metrics(log) if len(log) else None
        raise ScenarioFailure(msg, log, metrics)

    for k in range(n_steps):
        t = k * dt
        here = nearest_centerline_point(track, (state.x, state.y))
        lat = here.signed_error

        # lap bookkeeping from arc-length progress of the nearest centerline point
        s = track.arclength[here.nn_index]
        ds = math.remainder(s - prev_s, perimeter)
        prev_s = s
        progress += ds
        if progress >= (len(log.lap_indices) + 1) * perimeter:
            log.lap_indices.append(len(log))
            if len(log.lap_indices) >= cfg.laps:
                break

        if abs(lat) > track.half_width:
            log.collided = True
            break

        if lead is not None:
            lead_pose = lead.pose(t)
        try:
            if cfg.experiment == "baseline":
                ang = ground_truth_angles(track, state, per.l_n, per.l_f)
                theta_near, theta_far = ang.theta_near, ang.theta_far
            else:
                if costmap_clock.due(k):
                    rows = [per.near_rows, per.far_rows]
                    vals = cost_rows(track, state, rows)
                    held_near = row_angle(row_min_column(vals[0]), per.near_rows)
                    if cfg.experiment == "costmap":
                        held_far = row_angle(row_min_column(vals[1]), per.far_rows)
                if cfg.experiment == "vehicle_follow" and detect_clock.due(k):
                    box = bounding_box_from_pose(cam, state, lead_pose, lead_dims)
                    if box is not None:
                        held_far = bearing_from_bbox(box, cam)
                        last_detection_t = t
                    elif t - last_detection_t > cfg.lead.dropout_hold:
                        raise ExtractionError(f"lead vehicle lost for more than {cfg.lead.dropout_hold} s")
                theta_near, theta_far = held_near, held_far
        except ExtractionError as exc:
            fail(f"extraction failed at t={t:.2f} s: {exc}")

        cmd = ctl.step(driver, theta_near, theta_far)
        accel = speed_pid_step(pid, cfg.v_target, state.v, dt)
        log.rows.append(
            (t, state.x, state.y, state.psi, state.v, theta_near, theta_far, cmd.steer_angle, lat)
        )
        if lead is not None:
            log.lead.append(lead_pose)
        state = vehicle_step(state, cmd.steer_angle, accel, dt, vp.wheelbase)

    return log, compute_metrics(log)
