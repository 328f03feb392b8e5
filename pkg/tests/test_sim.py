import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpvdcm.controller import DriverParams
from tpvdcm.sim import (
    CSV_HEADER,
    EXPERIMENTS,
    LeadParams,
    LeadScript,
    ScenarioConfig,
    ScenarioFailure,
    TrajectoryLog,
    compute_metrics,
    format_metrics,
    run_scenario,
    validate_config,
    write_trajectory_csv,
)


def log_with_errors(errs):
    return TrajectoryLog(rows=[(0.01 * i, 0, 0, 0, 0, 0, 0, 0, e) for i, e in enumerate(errs)])


@pytest.mark.parametrize(
    "errs, mean, std",
    [([0.3] * 10, 0.3, 0.0), ([0.2, -0.2] * 5, 0.2, 0.0), ([0.0, 0.4] * 5, 0.2, 0.2)],
)
def test_metrics_examples(errs, mean, std):
    m = compute_metrics(log_with_errors(errs))
    assert m.mean_abs_lat_err == pytest.approx(mean, abs=1e-12)
    assert m.std_lat_err == pytest.approx(std, abs=1e-12)
    assert not m.collided and m.laps_completed == 0


def test_metrics_empty_log():
    with pytest.raises(ValueError):
        compute_metrics(TrajectoryLog())


def test_format_metrics():
    text = format_metrics(compute_metrics(log_with_errors([0.1])), seed=7)
    assert text.splitlines() == [
        "mean_abs_lat_err=0.1",
        "std_lat_err=0.0",
        "laps_completed=0",
        "collided=false",
        "seed=7",
    ]


# ---------------------------------------------------------------- lead script


def test_lead_without_wobble_on_centerline(oval):
    script = LeadScript(oval, 3.0, 4.0, 0.0, 3, np.random.default_rng(0))
    for t in (0.0, 1.3, 40.0):
        p = script.pose(t)
        q, tan = oval.point_at(3.0 + 4.0 * t)
        assert (p.x, p.y) == pytest.approx(tuple(q))
        assert p.psi == pytest.approx(math.atan2(tan[1], tan[0]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 1.0))
def test_lead_offset_bounded_and_periodic(oval, seed, amp):
    script = LeadScript(oval, 0.0, 4.0, amp, 3, np.random.default_rng(seed))
    s = np.linspace(0, oval.perimeter, 20001)
    off = script.offset(s)
    assert np.max(np.abs(off)) <= amp + 1e-12
    assert script.offset(oval.perimeter + 5.0) == pytest.approx(script.offset(5.0), abs=1e-9)
    a, b = script.pose(1.0), script.pose(1.0 + script.lap_time)
    assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-6)


def test_lead_offset_is_left_positive(circle):
    script = LeadScript(circle, 0.0, 4.0, 0.0, 0, None)
    script.amps, script.k, script.phase = np.array([0.3]), np.array([0.0]), np.array([math.pi / 2])
    p = script.pose(0.0)
    # start of the CCW circle is (13.5, 0); left of travel points inward
    # (the polyline chord leans by half a segment angle)
    assert (p.x, p.y) == pytest.approx((13.2, 0.0), abs=1e-3)


def test_lead_rejects_negative_time(oval):
    with pytest.raises(ValueError):
        LeadScript(oval, 0.0, 4.0, 0.4, 3, np.random.default_rng(0)).pose(-1.0)


# --------------------------------------------------------------------- runner


def short(experiment="baseline", **kw):
    return ScenarioConfig(experiment=experiment, laps=1, **kw)


def test_circle_lap_time(circle):
    log, m = run_scenario(short(random_start=False), track=circle)
    assert m.laps_completed == 1 and not m.collided
    lap_t = log.lap_indices[0] * 0.01
    assert lap_t == pytest.approx(2 * math.pi * 13.5 / 4.0, rel=0.10)


def test_tiny_steer_limit_collides():
    cfg = short(driver=DriverParams(delta_max=0.001))
    log, m = run_scenario(cfg)
    assert m.collided
    assert m.laps_completed == 0
    # the last logged row is still inside the lane
    assert abs(log.rows[-1][-1]) <= cfg.track.half_width


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_speed_settles(experiment):
    log, m = run_scenario(short(experiment))
    assert not m.collided
    t, v = log.column("t"), log.column("v")
    assert np.all(np.abs(v[t >= 3.0] - 4.0) < 0.1)


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_deterministic(experiment, tmp_path):
    cfg = short(experiment, rng_seed=11)
    paths = []
    for i in range(2):
        log, _ = run_scenario(cfg)
        paths.append(tmp_path / f"{i}.csv")
        write_trajectory_csv(log, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_seed_changes_run():
    a, _ = run_scenario(short(rng_seed=1))
    b, _ = run_scenario(short(rng_seed=2))
    assert a.rows[0][1:3] != b.rows[0][1:3]


def test_fixed_start():
    log, _ = run_scenario(short(random_start=False))
    assert log.rows[0][1:5] == (13.5, 0.0, pytest.approx(math.pi / 2), 0.0)


def test_lead_lost_raises(oval):
    # lead on the far side of the oval, roughly abeam and out of the field of view
    cfg = short("vehicle_follow", random_start=False, lead=LeadParams(gap=oval.perimeter / 2))
    with pytest.raises(ScenarioFailure) as info:
        run_scenario(cfg, track=oval)
    fail = info.value
    assert "lead" in str(fail)
    t = fail.log.column("t")
    assert t[-1] == pytest.approx(0.5, abs=1 / 13 + 0.011)
    assert fail.metrics is not None


def test_lead_log_aligned():
    log, _ = run_scenario(short("vehicle_follow", rng_seed=3))
    assert len(log.lead) == len(log.rows)


def test_csv_layout(tmp_path):
    log, _ = run_scenario(short())
    path = tmp_path / "traj.csv"
    write_trajectory_csv(log, path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == CSV_HEADER
    assert len(rows) == len(log) + 1
    assert all(len(r) == 9 for r in rows)
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back, np.array(log.rows, dtype=float))
    assert b"\r" not in path.read_bytes()


def test_time_column_uniform():
    log, _ = run_scenario(short())
    assert np.allclose(np.diff(log.column("t")), 0.01)


@pytest.mark.parametrize(
    "kw",
    [
        dict(experiment="nope"),
        dict(laps=0),
        dict(v_target=0.0),
        dict(dt=0.005),  # driver dt not updated
    ],
)
def test_validate_config(kw):
    with pytest.raises(ValueError):
        validate_config(replace(ScenarioConfig(), **kw))
