import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from tpvdcm.track import (
    Track,
    TrackError,
    build_oval_track,
    inside_lane,
    load_centerline_csv,
    nearest_centerline_point,
    save_centerline_csv,
)


def ellipse_distance(a, b, p):
    """Distance from p to the ellipse (a cos t, b sin t): dense scan then bounded refinement."""
    t = np.linspace(0, 2 * np.pi, 4001)
    d = np.hypot(a * np.cos(t) - p[0], b * np.sin(t) - p[1])
    t0 = t[np.argmin(d)]
    res = minimize_scalar(
        lambda s: math.hypot(a * math.cos(s) - p[0], b * math.sin(s) - p[1]),
        bounds=(t0 - 0.01, t0 + 0.01),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return res.fun


def test_circle_radius(circle):
    r = np.hypot(*circle.centerline.T)
    assert np.allclose(r, 13.5, atol=1e-9)
    assert len(circle) >= 1696
    assert circle.spacing <= 0.05
    assert circle.perimeter == pytest.approx(2 * math.pi * 13.5, rel=1e-5)


def test_counter_clockwise(oval):
    x, y = oval.centerline.T
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area > 0


def test_closed_loop_spacing(oval):
    gaps = np.hypot(*np.diff(np.vstack([oval.centerline, oval.centerline[:1]]), axis=0).T)
    assert gaps.max() <= 0.05
    assert gaps.max() - gaps.min() < 1e-3


def test_oval_dimensions(oval):
    x, y = oval.centerline.T
    assert x.max() == pytest.approx(13.5)
    assert y.max() == pytest.approx(13.5 * 0.75, abs=1e-3)


@pytest.mark.parametrize(
    "kw",
    [
        dict(aspect_ratio=0.0),
        dict(aspect_ratio=1.2),
        dict(half_width=0.0),
        dict(outer_diameter=6.0),
        dict(spacing=0.1),
        dict(aspect_ratio=0.1),
    ],
)
def test_degenerate_geometry(kw):
    with pytest.raises(TrackError):
        build_oval_track(**kw)


def test_on_centerline(oval):
    for i in (0, 17, 500, len(oval) - 1):
        s = nearest_centerline_point(oval, oval.centerline[i])
        assert s.nn_index == i
        assert abs(s.signed_error) <= oval.spacing / 2


@pytest.mark.parametrize("offset", [0.5, -0.5])
def test_signed_error_on_circle(circle, offset):
    # inside a CCW circle is left of travel
    for ang in np.linspace(0, 2 * np.pi, 13)[:-1]:
        p = (13.5 - offset) * np.array([math.cos(ang), math.sin(ang)])
        s = nearest_centerline_point(circle, p)
        assert s.signed_error == pytest.approx(offset, abs=circle.spacing / 2)


def test_tie_breaks_to_lowest_index():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    tr = Track(pts, 0.2)
    assert nearest_centerline_point(tr, (0.5, 0.5)).nn_index == 0


def test_inside_lane_boundary(circle):
    assert inside_lane(circle, circle.centerline[0])
    assert inside_lane(circle, (15.0, 0.0))
    assert inside_lane(circle, (12.0, 0.0))
    assert not inside_lane(circle, (15.1, 0.0))
    assert not inside_lane(circle, (11.9, 0.0))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-1.5, 1.5))
def test_distance_matches_analytic_ellipse(oval, phase, offset):
    a, b = 13.5, 13.5 * 0.75
    c = np.array([a * math.cos(phase), b * math.sin(phase)])
    n = np.array([b * math.cos(phase), a * math.sin(phase)])
    p = c + offset * n / np.linalg.norm(n)
    s = nearest_centerline_point(oval, p)
    assert abs(abs(s.signed_error) - ellipse_distance(a, b, p)) <= oval.spacing / 2
    # polyline distance is the finer of the two
    assert oval.distance(p) == pytest.approx(ellipse_distance(a, b, p), abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 1.4))
def test_reflection_flips_sign(oval, idx, offset):
    i = idx % len(oval)
    c, (tx, ty) = oval.centerline[i], oval.tangents[i]
    normal = np.array([-ty, tx])
    left = nearest_centerline_point(oval, c + offset * normal).signed_error
    right = nearest_centerline_point(oval, c - offset * normal).signed_error
    assert left > 0 > right
    assert left == pytest.approx(-right, abs=oval.spacing)


def test_inside_lane_monotone(circle):
    offsets = np.linspace(0, 3, 61)
    flags = [inside_lane(circle, (13.5 + o, 0.0)) for o in offsets]
    # once outside, stays outside
    first_out = flags.index(False)
    assert not any(flags[first_out:])


def test_point_at_wraps(oval):
    p0, t0 = oval.point_at(0.0)
    p1, t1 = oval.point_at(oval.perimeter)
    assert np.allclose(p0, p1) and np.allclose(t0, t1)
    p, _ = oval.point_at(oval.arclength[100])
    assert np.allclose(p, oval.centerline[100])


def test_csv_round_trip(oval, tmp_path):
    path = tmp_path / "centerline.csv"
    save_centerline_csv(oval, path)
    back = load_centerline_csv(path, oval.half_width)
    assert np.array_equal(back.centerline, oval.centerline)
    assert back.spacing == oval.spacing


def test_track_is_read_only(oval):
    with pytest.raises(ValueError):
        oval.centerline[0, 0] = 1.0
