"""Planar geometry: angle wrapping, ego poses, trajectory interpolation, frames.

Conventions used throughout the package:

- angles are degrees, wrapped to the half-open interval (-180, 180];
- headings are counterclockwise-positive from world east;
- the ego frame has x forward along the heading and y to the vehicle's left,
  so bearings are 0 straight ahead and positive to the left.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DegenerateBearing, InputFileError, InvalidInput, OutOfRange


def wrap_angle(deg: float) -> float:
    """Wrap degrees into (-180, 180]."""
    if not math.isfinite(deg):
        raise InvalidInput(f"non-finite angle {deg!r}")
    r = (deg + 180.0) % 360.0 - 180.0
    return 180.0 if r <= -180.0 else r


def wrap_angles(deg) -> np.ndarray:
    """Vectorised :func:`wrap_angle`."""
    a = np.asarray(deg, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("non-finite angle in array")
    r = np.mod(a + 180.0, 360.0) - 180.0
    return np.where(r <= -180.0, 180.0, r)


def angle_diff(a: float, b: float) -> float:
    """Signed shortest rotation from ``b`` to ``a``."""
    return wrap_angle(a - b)


def unwrap_deg(deg) -> np.ndarray:
    return np.degrees(np.unwrap(np.radians(np.asarray(deg, dtype=float))))


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInput("non-finite pose position")
        object.__setattr__(self, "heading", wrap_angle(self.heading))


class EgoPoint(NamedTuple):
    x_fwd: float
    y_lat: float


class EgoTrajectory:
    """Time-ordered planar vehicle poses.

    Stored column-wise; ``heading`` is kept wrapped while an unwrapped copy is
    used for interpolation along the shortest arc.
    """

    def __init__(self, t, x, y, heading):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        heading = np.asarray(heading, dtype=float)
        if not (t.shape == x.shape == y.shape == heading.shape) or t.ndim != 1:
            raise InvalidInput("trajectory columns must be equal-length 1-D arrays")
        if t.size < 2:
            raise InvalidInput("trajectory needs at least 2 samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("trajectory timestamps must be strictly increasing")
        for name, col in (("t", t), ("x", x), ("y", y), ("heading", heading)):
            if not np.all(np.isfinite(col)):
                raise InvalidInput(f"non-finite values in trajectory column {name}")
        self.t = t
        self.x = x
        self.y = y
        self.heading = wrap_angles(heading)
        self._unwrapped = unwrap_deg(self.heading)

    def __len__(self) -> int:
        return self.t.size

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def pose_at_index(self, i: int) -> Pose2D:
        return Pose2D(float(self.x[i]), float(self.y[i]), float(self.heading[i]))

    def heading_rate(self) -> np.ndarray:
        """Heading rate in deg/s at every sample (central differences)."""
        return np.gradient(self._unwrapped, self.t)


def interpolate_poses(traj: EgoTrajectory, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised pose interpolation; returns ``(x, y, heading)`` arrays."""
    ts = np.asarray(ts, dtype=float)
    if ts.size and (ts.min() < traj.t[0] or ts.max() > traj.t[-1]):
        raise OutOfRange(
            f"time outside trajectory [{traj.t[0]}, {traj.t[-1]}]")
    x = np.interp(ts, traj.t, traj.x)
    y = np.interp(ts, traj.t, traj.y)
    h = np.interp(ts, traj.t, traj._unwrapped)
    return x, y, wrap_angles(h)


def interpolate_pose(traj: EgoTrajectory, t: float) -> Pose2D:
    x, y, h = interpolate_poses(traj, np.array([t]))
    return Pose2D(float(x[0]), float(y[0]), float(h[0]))


def world_to_ego(pose: Pose2D, world_point) -> EgoPoint:
    px, py = float(world_point[0]), float(world_point[1])
    if not (math.isfinite(px) and math.isfinite(py)):
        raise InvalidInput("non-finite world point")
    dx, dy = px - pose.x, py - pose.y
    th = math.radians(pose.heading)
    c, s = math.cos(th), math.sin(th)
    return EgoPoint(c * dx + s * dy, -s * dx + c * dy)


def ego_to_world(pose: Pose2D, p: EgoPoint) -> tuple[float, float]:
    th = math.radians(pose.heading)
    c, s = math.cos(th), math.sin(th)
    return pose.x + c * p[0] - s * p[1], pose.y + s * p[0] + c * p[1]


def world_to_ego_many(x, y, heading, px, py) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise world->ego transform over arrays of poses and points."""
    th = np.radians(heading)
    c, s = np.cos(th), np.sin(th)
    dx = np.asarray(px, dtype=float) - x
    dy = np.asarray(py, dtype=float) - y
    return c * dx + s * dy, -s * dx + c * dy


def bearing(p: EgoPoint) -> float:
    """Bearing of an ego-frame point: 0 straight ahead, positive to the left."""
    if p[0] == 0.0 and p[1] == 0.0:
        raise DegenerateBearing("bearing of the ego origin is undefined")
    return wrap_angle(math.degrees(math.atan2(p[1], p[0])))


def bearings(x_fwd, y_lat) -> np.ndarray:
    x_fwd = np.asarray(x_fwd, dtype=float)
    y_lat = np.asarray(y_lat, dtype=float)
    if np.any((x_fwd == 0.0) & (y_lat == 0.0)):
        raise DegenerateBearing("bearing of the ego origin is undefined")
    return wrap_angles(np.degrees(np.arctan2(y_lat, x_fwd)))


# --- ego trajectory CSV -------------------------------------------------------

EGO_HEADER = ["t", "x", "y", "heading_deg"]


def read_trajectory_csv(path) -> EgoTrajectory:
    path = Path(path)
    rows = []
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != EGO_HEADER:
                raise InputFileError(path, 1, f"expected header {','.join(EGO_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise InputFileError(path, lineno, str(exc)) from None
                if len(rows[-1]) != 4:
                    raise InputFileError(path, lineno, "expected 4 columns")
    except OSError as exc:
        raise InputFileError(path, None, str(exc)) from None
    if len(rows) < 2:
        raise InputFileError(path, None, "trajectory needs at least 2 samples")
    a = np.array(rows)
    try:
        return EgoTrajectory(a[:, 0], a[:, 1], a[:, 2], a[:, 3])
    except InvalidInput as exc:
        raise InputFileError(path, None, str(exc)) from None


def write_trajectory_csv(path, traj: EgoTrajectory) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EGO_HEADER)
        for row in zip(traj.t, traj.x, traj.y, traj.heading):
            w.writerow([repr(float(v)) for v in row])
