import math

import numpy as np
import pytest

from tpvdcm.track import Track, build_oval_track

ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def stadium_points(straight=40.0, radius=10.0, spacing=0.05):
    """Closed CCW stadium: bottom straight y=-radius from x=0 to x=straight, then a half circle.

    Straights are sampled on exact multiples of `spacing` along x.
    """
    n_straight = int(round(straight / spacing))
    bottom = np.column_stack([np.arange(n_straight) * spacing, np.full(n_straight, -radius)])
    n_arc = int(math.ceil(math.pi * radius / spacing))
    phi = -math.pi / 2 + np.arange(n_arc) * math.pi / n_arc
    right = np.column_stack([straight + radius * np.cos(phi), radius * np.sin(phi)])
    top = np.column_stack([straight - np.arange(n_straight) * spacing, np.full(n_straight, radius)])
    phi = math.pi / 2 + np.arange(n_arc) * math.pi / n_arc
    left = np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])
    return np.vstack([bottom, right, top, left])


@pytest.fixture(scope="session")
def oval():
    return build_oval_track()


@pytest.fixture(scope="session")
def circle():
    return build_oval_track(30.0, 1.0, 1.5, 0.05)


@pytest.fixture(scope="session")
def stadium():
    """Track with a 40 m straight along y = -10, driven in +x."""
    return Track(stadium_points(), 1.5)
