"""Core 2-D geometry: poses, polylines, rigid transforms, resampling, clipping.

All angles are radians, counter-clockwise positive, wrapped to (-pi, pi].
Degrees appear only at the config/IO boundary, never in here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi

# tolerance below which two points are considered the same vertex
MERGE_EPS = 1e-9


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(float(theta), TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class Pose2D:
    """SE(2) vehicle pose at a timestamp.

    x, y in meters; theta is the heading in radians measured CCW from +X.
    """

    t: float
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(self.theta))


class Polyline:
    """Ordered 2-D point sequence in meters.

    At least two points; consecutive points must be more than MERGE_EPS apart.
    The backing array is read-only so instances can be shared freely.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.array(points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("polyline points must have shape (n, 2)")
        if pts.shape[0] < 2:
            raise ValueError("polyline needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline points must be finite")
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if steps.size and float(steps.min()) <= MERGE_EPS:
            raise ValueError("consecutive polyline points closer than 1e-9 m")
        pts.setflags(write=False)
        self.points = pts

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, Polyline) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"Polyline({len(self)} points)"

    def arc_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


class ElementClass(str, Enum):
    """The five vectorized map element classes."""

    DIVIDER_DASHED = "divider_dashed"
    DIVIDER_SOLID = "divider_solid"
    BOUNDARY = "boundary"
    CENTERLINE = "centerline"
    PED_CROSSING = "ped_crossing"

    @property
    def short(self) -> str:
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    ElementClass.DIVIDER_DASHED: "dsh",
    ElementClass.DIVIDER_SOLID: "sol",
    ElementClass.BOUNDARY: "bou",
    ElementClass.CENTERLINE: "cen",
    ElementClass.PED_CROSSING: "ped",
}


@dataclass(frozen=True)
class MapElement:
    """A classed polyline in a named frame (global map or ego frame)."""

    id: str
    cls: ElementClass
    geometry: Polyline

    def __post_init__(self):
        object.__setattr__(self, "cls", ElementClass(self.cls))


def transform_to_ego(p: Polyline, pose: Pose2D) -> Polyline:
    """Express a global-frame polyline in the pose's ego frame.

    The ego sits at the origin with its heading along +X, so each point maps
    to R(-theta) @ (point - position).
    """
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    rel = p.points - np.array([pose.x, pose.y])
    out = np.empty_like(rel)
    out[:, 0] = c * rel[:, 0] + s * rel[:, 1]
    out[:, 1] = -s * rel[:, 0] + c * rel[:, 1]
    return Polyline(out)


def transform_to_global(p: Polyline, pose: Pose2D) -> Polyline:
    """Inverse of transform_to_ego: ego-frame polyline back to the global frame."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    pts = p.points
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + pose.x
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + pose.y
    return Polyline(out)


def resample_max_spacing(p: Polyline, d_max: float) -> Polyline:
    """Insert points on segments so consecutive spacing is at most d_max.

    All original vertices are kept exactly; inserted points are linear
    interpolations, so the curve itself is unchanged.
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    pts = p.points
    seg = np.diff(pts, axis=0)
    lengths = np.sqrt((seg * seg).sum(axis=1))
    # the 1e-12 guard keeps exact multiples (e.g. 3 m at 1 m) from gaining a point
    counts = np.maximum(1, np.ceil(lengths / d_max - 1e-12).astype(np.int64))
    if int(counts.max(initial=1)) == 1:
        return p
    total = int(counts.sum())
    seg_of = np.repeat(np.arange(len(seg)), counts)
    rank = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts) + 1
    frac = rank / counts[seg_of]
    out = np.empty((total + 1, 2))
    out[0] = pts[0]
    out[1:] = pts[:-1][seg_of] + frac[:, None] * seg[seg_of]
    out[np.flatnonzero(rank == counts[seg_of]) + 1] = pts[1:]  # vertices kept exact
    return Polyline(out)


def _clip_segment_params(a: np.ndarray, d: np.ndarray, x_range, y_range):
    """Liang-Barsky parameter intervals for every segment at once.

    Returns (t0, t1) arrays; a segment intersects the rectangle iff t0 <= t1.
    """
    n = a.shape[0]
    t0 = np.zeros(n)
    t1 = np.ones(n)
    for axis, (lo, hi) in enumerate((x_range, y_range)):
        start = a[:, axis]
        delta = d[:, axis]
        moving = delta != 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r_lo = (lo - start) / delta
            r_hi = (hi - start) / delta
        enter = np.where(delta > 0, r_lo, r_hi)
        leave = np.where(delta > 0, r_hi, r_lo)
        t0 = np.where(moving, np.maximum(t0, enter), t0)
        t1 = np.where(moving, np.minimum(t1, leave), t1)
        # segments parallel to this axis and outside the band never intersect
        outside = ~moving & ((start < lo) | (start > hi))
        t0 = np.where(outside, 1.0, t0)
        t1 = np.where(outside, -1.0, t1)
    return t0, t1


def clip_to_rect(p: Polyline, x_range, y_range) -> list[Polyline]:
    """Clip a polyline to an axis-aligned rectangle.

    Returns zero or more pieces. Boundary crossings get an interpolated point
    exactly on the rectangle edge; a polyline that leaves and re-enters yields
    multiple pieces. Duplicate points from corner grazing are merged.
    """
    xmin, xmax = float(x_range[0]), float(x_range[1])
    ymin, ymax = float(y_range[0]), float(y_range[1])
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("degenerate clip rectangle")

    pts = p.points
    a = pts[:-1]
    d = pts[1:] - pts[:-1]
    t0, t1 = _clip_segment_params(a, d, (xmin, xmax), (ymin, ymax))
    valid = t0 <= t1
    if not valid.any():
        return []
    if valid.all() and not t0.any() and (t1 == 1.0).all():
        return [p]  # entirely inside

    def snap(x: float, lo: float, hi: float) -> float:
        # crossings computed parametrically land within fp error of an edge;
        # pin them exactly onto it so downstream containment checks are exact
        if x - lo <= MERGE_EPS:
            return lo
        if hi - x <= MERGE_EPS:
            return hi
        return x

    pieces: list[Polyline] = []
    cur: list[tuple[float, float]] = []

    def flush():
        if len(cur) >= 2:
            pieces.append(Polyline(cur))
        cur.clear()

    for i in range(a.shape[0]):
        if not valid[i]:
            flush()
            continue
        # exact endpoints when the segment end is already inside
        if t0[i] == 0.0:
            qa = (pts[i, 0], pts[i, 1])
        else:
            qa = (
                snap(a[i, 0] + t0[i] * d[i, 0], xmin, xmax),
                snap(a[i, 1] + t0[i] * d[i, 1], ymin, ymax),
            )
        if t1[i] == 1.0:
            qb = (pts[i + 1, 0], pts[i + 1, 1])
        else:
            qb = (
                snap(a[i, 0] + t1[i] * d[i, 0], xmin, xmax),
                snap(a[i, 1] + t1[i] * d[i, 1], ymin, ymax),
            )
        if cur and math.hypot(cur[-1][0] - qa[0], cur[-1][1] - qa[1]) <= MERGE_EPS:
            pass  # continues the current piece
        else:
            flush()
            cur.append(qa)
        if math.hypot(cur[-1][0] - qb[0], cur[-1][1] - qb[1]) > MERGE_EPS:
            cur.append(qb)
    flush()
    return pieces


def signed_angle(u, v) -> float:
    """Signed angle from vector u to vector v, in (-pi, pi]."""
    ux, uy = float(u[0]), float(u[1])
    vx, vy = float(v[0]), float(v[1])
    if math.hypot(ux, uy) <= 1e-12 or math.hypot(vx, vy) <= 1e-12:
        raise ValueError("degenerate displacement")
    ang = math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)
    return normalize_angle(ang)
