"""Feature-angle extractors and the camera geometry behind synthetic detections.

All angles are CCW-positive: a target left of the heading gives a positive
angle. Body frame is x forward, y left, z up. Camera frame is X right,
Y down, Z along the optical axis.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .track import Track, nearest_centerline_point
from .vehicle import VehicleState, wrap_angle


class ExtractionError(RuntimeError):
    """No usable feature point could be extracted."""


@dataclass(frozen=True)
class FeatureAngles:
    theta_near: float
    theta_far: float


# ---------------------------------------------------------------- ground truth


def ground_truth_angles(
    track: Track, pose: VehicleState, l_n: float = 1.0, l_f: float = 3.0
) -> FeatureAngles:
    if not 0 < l_n < l_f:
        raise ValueError("need 0 < l_n < l_f")
    own = nearest_centerline_point(track, (pose.x, pose.y))
    if abs(own.signed_error) > 2 * track.half_width:
        raise ExtractionError(
            f"vehicle {abs(own.signed_error):.2f} m off the centerline, beyond twice the half width"
        )
    c, s = math.cos(pose.psi), math.sin(pose.psi)
    out = []
    for dist in (l_n, l_f):
        probe = (pose.x + dist * c, pose.y + dist * s)
        nx, ny = nearest_centerline_point(track, probe).nn_point
        out.append(wrap_angle(math.atan2(ny - pose.y, nx - pose.x) - pose.psi))
    return FeatureAngles(*out)


# -------------------------------------------------------------------- cost map


@dataclass(frozen=True, eq=False)
class CostMapGrid:
    """Top-down cost image, row 0 at the top; ego at the bottom-center pixel facing up."""

    values: np.ndarray
    px_per_m: float = 15.0

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def row(self, rows_from_bottom: int) -> np.ndarray:
        return self.values[self.height - 1 - rows_from_bottom]

    def to_pgm(self, path) -> None:
        """8-bit binary graymap, 0 = black = zero cost."""
        img = np.round(np.clip(self.values, 0, 1) * 255).astype(np.uint8)
        with open(path, "wb") as f:
            f.write(f"P5\n{self.width} {self.height}\n255\n".encode("ascii"))
            f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    header = []
    pos = 0
    while len(header) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        header.append(data[start:pos])
    if header[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(t) for t in header[1:])
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    return pixels.reshape(h, w).astype(float) / maxval


def costmap_pixel_to_world(
    pose: VehicleState, rows, cols, width: int = 160, height: int = 128, px_per_m: float = 15.0
) -> np.ndarray:
    """World (x, y) of pixel centers; rows are image rows (0 = top)."""
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    fwd = (height - 1 - rows) / px_per_m
    left = (width / 2 - cols) / px_per_m
    c, s = math.cos(pose.psi), math.sin(pose.psi)
    return np.stack([pose.x + c * fwd - s * left, pose.y + s * fwd + c * left], axis=-1)


def cost_rows(
    track: Track,
    pose: VehicleState,
    rows_from_bottom,
    width: int = 160,
    height: int = 128,
    px_per_m: float = 15.0,
) -> np.ndarray:
    """Cost values for selected rows only, shape (len(rows_from_bottom), width)."""
    img_rows = height - 1 - np.asarray(rows_from_bottom)
    rr, cc = np.meshgrid(img_rows, np.arange(width), indexing="ij")
    world = costmap_pixel_to_world(pose, rr, cc, width, height, px_per_m)
    d = track.distance(world)
    return np.minimum((d / track.half_width) ** 2, 1.0)


def render_cost_map(
    track: Track,
    pose: VehicleState,
    width: int = 160,
    height: int = 128,
    px_per_m: float = 15.0,
) -> CostMapGrid:
    """Exact-geometry cost map: cost grows with the squared distance to the centerline, clamped at 1."""
    values = cost_rows(track, pose, np.arange(height)[::-1], width, height, px_per_m)
    return CostMapGrid(values, px_per_m)


def row_min_column(row: np.ndarray) -> int:
    """Argmin column; ties go to the column nearest the image center, then the lower index."""
    row = np.asarray(row)
    if row.min() >= 1.0:
        raise ExtractionError("no lane visible in cost-map row")
    cand = np.flatnonzero(row == row.min())
    center = len(row) / 2
    return int(cand[np.argmin(np.abs(cand - center))])


def row_angle(col: float, row_from_bottom: float, width: int = 160) -> float:
    return math.atan((width / 2 - col) / row_from_bottom)


def costmap_angles(grid: CostMapGrid, near_rows: int = 15, far_rows: int = 45) -> FeatureAngles:
    for r in (near_rows, far_rows):
        if not 0 < r < grid.height:
            raise ValueError(f"row {r} outside a grid of height {grid.height}")
    return FeatureAngles(
        row_angle(row_min_column(grid.row(near_rows)), near_rows, grid.width),
        row_angle(row_min_column(grid.row(far_rows)), far_rows, grid.width),
    )


# -------------------------------------------------------------------- camera

# body (x fwd, y left, z up) -> camera (X right, Y down, Z fwd)
BODY_TO_CAMERA = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


@dataclass(frozen=True, eq=False)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: BODY_TO_CAMERA.copy())
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.2]))

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @classmethod
    def from_fov(
        cls,
        fov: float = math.radians(90.0),
        width: int = 416,
        height: int = 416,
        mount_height: float = 0.2,
        mount_forward: float = 0.0,
    ) -> "CameraModel":
        f = width / (2 * math.tan(fov / 2))
        return cls(
            f, f, width / 2, height / 2, width, height,
            BODY_TO_CAMERA.copy(), np.array([mount_forward, 0.0, mount_height]),
        )

    @property
    def fov(self) -> float:
        return 2 * math.atan(self.width / (2 * self.fx))

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def world_to_camera(self, pose: VehicleState, q_world) -> np.ndarray:
        q = np.asarray(q_world, dtype=float)
        c, s = math.cos(pose.psi), math.sin(pose.psi)
        world_to_body = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
        body = (q - np.array([pose.x, pose.y, 0.0])) @ world_to_body.T
        return (body - self.position) @ self.rotation.T

    def camera_to_world(self, pose: VehicleState, p_cam) -> np.ndarray:
        body = np.asarray(p_cam, dtype=float) @ self.rotation + self.position
        c, s = math.cos(pose.psi), math.sin(pose.psi)
        body_to_world = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return body @ body_to_world.T + np.array([pose.x, pose.y, 0.0])


def project_camera_point(cam: CameraModel, p_cam) -> tuple[float, float] | None:
    X, Y, Z = (float(v) for v in p_cam)
    if Z <= 0:
        return None
    return cam.fx * X / Z + cam.cx, cam.fy * Y / Z + cam.cy


def project_world_point(cam: CameraModel, trailing_pose: VehicleState, q_world):
    """Pixel (u, v) of a world point, or None when it is not in front of the camera."""
    return project_camera_point(cam, cam.world_to_camera(trailing_pose, q_world))


def unproject_pixel(cam: CameraModel, pose: VehicleState, u: float, v: float, depth: float) -> np.ndarray:
    """World point seen at pixel (u, v) at the given optical-axis depth."""
    p_cam = np.array([(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth])
    return cam.camera_to_world(pose, p_cam)


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    clipped: bool = False

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    @property
    def width(self) -> float:
        return self.x_max - self.x_min


def box_corners(pose: VehicleState, dims) -> np.ndarray:
    """8 corners of a vehicle box: footprint centered on (x, y), from the ground up to H."""
    L, W, H = dims
    c, s = math.cos(pose.psi), math.sin(pose.psi)
    out = []
    for dx in (-L / 2, L / 2):
        for dy in (-W / 2, W / 2):
            for z in (0.0, H):
                out.append((pose.x + c * dx - s * dy, pose.y + s * dx + c * dy, z))
    return np.array(out)


def bounding_box_from_pose(
    cam: CameraModel, trailing_pose: VehicleState, lead_pose: VehicleState, lead_dims=(0.9, 0.5, 0.4)
) -> BoundingBox | None:
    """Image hull of the lead's 3-D box, clamped to the image; None if not visible."""
    if min(lead_dims) <= 0:
        raise ValueError("lead dimensions must be positive")
    pc = cam.world_to_camera(trailing_pose, box_corners(lead_pose, lead_dims))
    pc = pc[pc[:, 2] > 1e-6]
    if len(pc) == 0:
        return None
    u = cam.fx * pc[:, 0] / pc[:, 2] + cam.cx
    v = cam.fy * pc[:, 1] / pc[:, 2] + cam.cy
    x0, x1, y0, y1 = u.min(), u.max(), v.min(), v.max()
    if x1 < 0 or x0 > cam.width or y1 < 0 or y0 > cam.height:
        return None
    clipped = len(pc) < 8 or x0 < 0 or y0 < 0 or x1 > cam.width or y1 > cam.height
    return BoundingBox(
        float(max(x0, 0.0)), float(max(y0, 0.0)),
        float(min(x1, cam.width)), float(min(y1, cam.height)),
        bool(clipped),
    )


def bearing_from_bbox(box: BoundingBox, cam: CameraModel) -> float:
    """Far-point angle from the box center, mapped linearly across the horizontal FOV."""
    half = cam.width / 2
    x_fp = (box.x_min + box.x_max) / 2
    return (half - x_fp) / half * (cam.fov / 2)


def write_boxes_csv(rows, path) -> None:
    """rows: iterable of (t, BoundingBox or None)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "x_min", "y_min", "x_max", "y_max"])
        for t, box in rows:
            if box is None:
                w.writerow([repr(t), "", "", "", ""])
            else:
                w.writerow([repr(t), repr(box.x_min), repr(box.y_min), repr(box.x_max), repr(box.y_max)])
