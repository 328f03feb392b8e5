"""Closed test-track geometry around a sampled centerline."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


class TrackError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Track:
    """Centerline points in driving order (counter-clockwise) plus lane half width.

    `spacing` is the largest gap between consecutive points, including the
    closing gap from the last point back to the first.
    """

    centerline: np.ndarray
    half_width: float
    spacing: float = field(init=False)
    tangents: np.ndarray = field(init=False, repr=False)
    arclength: np.ndarray = field(init=False, repr=False)
    perimeter: float = field(init=False)
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.centerline, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise TrackError("centerline must be an (N, 2) array with N >= 3")
        if not self.half_width > 0:
            raise TrackError(f"half_width must be > 0, got {self.half_width}")
        seg = np.roll(pts, -1, axis=0) - pts
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len == 0):
            raise TrackError("centerline has repeated points")
        fwd = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
        tan = fwd / np.hypot(fwd[:, 0], fwd[:, 1])[:, None]
        pts.setflags(write=False)
        tan.setflags(write=False)
        set_ = object.__setattr__
        set_(self, "centerline", pts)
        set_(self, "spacing", float(seg_len.max()))
        set_(self, "tangents", tan)
        set_(self, "arclength", np.concatenate([[0.0], np.cumsum(seg_len)[:-1]]))
        set_(self, "perimeter", float(seg_len.sum()))
        set_(self, "_tree", cKDTree(pts))

    def __len__(self):
        return len(self.centerline)

    def point_at(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and unit tangent at arc length s (wrapped to one lap)."""
        s = s % self.perimeter
        i = int(np.searchsorted(self.arclength, s, side="right")) - 1
        j = (i + 1) % len(self)
        seg = self.centerline[j] - self.centerline[i]
        seg_len = math.hypot(seg[0], seg[1])
        frac = (s - self.arclength[i]) / seg_len
        return self.centerline[i] + frac * seg, seg / seg_len

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Unsigned distance from each point to the centerline polyline."""
        pts = np.asarray(points, dtype=float)
        shape = pts.shape[:-1]
        pts = pts.reshape(-1, 2)
        _, idx = self._tree.query(pts)
        n = len(self)
        best = np.full(len(pts), np.inf)
        for a_idx in (idx - 1) % n, idx:
            a = self.centerline[a_idx]
            ab = self.centerline[(a_idx + 1) % n] - a
            ap = pts - a
            t = np.clip(np.einsum("ij,ij->i", ap, ab) / np.einsum("ij,ij->i", ab, ab), 0, 1)
            d = np.hypot(*(ap - t[:, None] * ab).T)
            best = np.minimum(best, d)
        return best.reshape(shape)


@dataclass(frozen=True)
class LateralSample:
    nn_point: np.ndarray
    nn_index: int
    signed_error: float


def check_oval_params(outer_diameter, aspect_ratio, half_width, spacing) -> None:
    if not half_width > 0:
        raise TrackError(f"half_width must be > 0, got {half_width}")
    if not outer_diameter > 4 * half_width:
        raise TrackError("outer_diameter must exceed 4 * half_width")
    if not 0 < aspect_ratio <= 1:
        raise TrackError(f"aspect_ratio must be in (0, 1], got {aspect_ratio}")
    if not 0 < spacing <= 0.05:
        raise TrackError(f"spacing must be in (0, 0.05] m, got {spacing}")
    if (outer_diameter / 2 - half_width) * aspect_ratio <= half_width:
        raise TrackError("semi-minor axis must exceed half_width")


def build_oval_track(
    outer_diameter: float = 30.0,
    aspect_ratio: float = 0.75,
    half_width: float = 1.5,
    spacing: float = 0.05,
) -> Track:
    """Elliptic centerline inscribed in a lane of the given outer diameter.

    Semi-major axis is outer_diameter/2 - half_width along x; the semi-minor
    axis is that times aspect_ratio. Points are equally spaced in arc
    length, no farther apart than `spacing`, starting at (a, 0).
    """
    check_oval_params(outer_diameter, aspect_ratio, half_width, spacing)
    a = outer_diameter / 2 - half_width
    b = a * aspect_ratio
    # fine parametric sampling, then resample uniformly in arc length
    m = max(20000, int(40 * 2 * math.pi * a / spacing))
    phi = np.linspace(0.0, 2 * math.pi, m + 1)
    dense = np.column_stack([a * np.cos(phi), b * np.sin(phi)])
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(dense, axis=0).T))])
    n = int(math.ceil(s[-1] / spacing))
    targets = np.arange(n) * (s[-1] / n)
    phi_t = np.interp(targets, s, phi)
    pts = np.column_stack([a * np.cos(phi_t), b * np.sin(phi_t)])
    return Track(pts, half_width)


def nearest_centerline_point(track: Track, p) -> LateralSample:
    """Closest centerline point to p, with the signed lateral offset.

    Positive error means p lies left of the travel direction. Ties resolve
    to the lowest index.
    """
    p = np.asarray(p, dtype=float)
    d = track.centerline - p
    d2 = d[:, 0] ** 2 + d[:, 1] ** 2
    i = int(np.argmin(d2))
    nn = track.centerline[i]
    tx, ty = track.tangents[i]
    rx, ry = p[0] - nn[0], p[1] - nn[1]
    dist = math.sqrt(d2[i])
    cross = tx * ry - ty * rx
    return LateralSample(nn, i, dist if cross >= 0 else -dist)


def inside_lane(track: Track, p) -> bool:
    return abs(nearest_centerline_point(track, p).signed_error) <= track.half_width


def save_centerline_csv(track: Track, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for x, y in track.centerline:
            w.writerow([repr(float(x)), repr(float(y))])


def load_centerline_csv(path, half_width: float = 1.5) -> Track:
    rows = []
    with open(Path(path), newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append((float(row[0]), float(row[1])))
    return Track(np.array(rows), half_width)
