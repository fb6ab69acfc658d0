"""Deterministic synthetic maps and trajectories for tests and benchmarks.

Scenes are built around a centerline path (straight line or constant-curvature
arc); boundaries, dividers and lane centerlines are lateral offsets of that
path, pedestrian crossings are closed quads across the road. The trajectory
follows the ego lane at 10 m/s sampled at 10 Hz with tangent headings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geom import ElementClass, MapElement, Polyline, Pose2D
from .labelgen import GlobalMap
from .noise import Trajectory

SCENE_KINDS = ("straight_road", "curved_road", "intersection")

SPEED = 10.0      # m/s
SAMPLE_HZ = 10.0  # trajectory sampling rate
# vertex spacing of generated polylines; kept away from integer multiples of
# the 1 m metric resampling so sub-millimeter IO rounding cannot flip the
# subdivision count of a segment (which would misalign resampled grids)
ELEMENT_STEP = 1.9

PED_SPACING = 40.0  # distance between crossings along the road
PED_LENGTH = 3.0    # crossing extent along the road


@dataclass(frozen=True)
class SceneTemplate:
    kind: str = "straight_road"
    lane_width: float = 3.5
    length: float = 100.0
    num_lanes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ConfigError(f"unknown scene kind {self.kind!r}, expected one of {SCENE_KINDS}")
        if self.lane_width <= 0:
            raise ConfigError("lane_width must be positive")
        if self.length <= 0:
            raise ConfigError("length must be positive")
        if int(self.num_lanes) < 1:
            raise ConfigError("num_lanes must be >= 1")
        object.__setattr__(self, "num_lanes", int(self.num_lanes))
        object.__setattr__(self, "seed", int(self.seed))


class _Path:
    """Centerline path: s (arc length) -> position, tangent angle, left normal."""

    def __init__(self, origin: np.ndarray, curvature: float):
        self.origin = origin
        self.curvature = curvature  # 0 for straight; 1/R for a left-turning arc

    def point(self, s: float, offset: float) -> tuple[float, float]:
        if self.curvature == 0.0:
            return float(self.origin[0] + s), float(self.origin[1] + offset)
        radius = 1.0 / self.curvature
        phi = s * self.curvature
        cx, cy = self.origin[0], self.origin[1] + radius
        r = radius - offset
        return float(cx + r * math.sin(phi)), float(cy - r * math.cos(phi))

    def heading(self, s: float) -> float:
        return s * self.curvature


class _RotatedPath(_Path):
    """Straight path rotated by a fixed angle, centered on a crossing point."""

    def __init__(self, center: np.ndarray, angle: float, half_len: float):
        super().__init__(center, 0.0)
        self.angle = angle
        self.half_len = half_len

    def point(self, s: float, offset: float) -> tuple[float, float]:
        lx, ly = s - self.half_len, offset
        c, sn = math.cos(self.angle), math.sin(self.angle)
        return (
            float(self.origin[0] + c * lx - sn * ly),
            float(self.origin[1] + sn * lx + c * ly),
        )

    def heading(self, s: float) -> float:
        return self.angle


def _offset_polyline(path: _Path, offset: float, length: float) -> Polyline:
    n = max(2, int(math.ceil(length / ELEMENT_STEP)) + 1)
    svals = np.linspace(0.0, length, n)
    return Polyline([path.point(s, offset) for s in svals])


def _ped_crossing(path: _Path, s0: float, half_width: float) -> Polyline:
    corners = [
        path.point(s0, -half_width),
        path.point(s0 + PED_LENGTH, -half_width),
        path.point(s0 + PED_LENGTH, half_width),
        path.point(s0, half_width),
    ]
    corners.append(corners[0])  # ped crossings are stored closed
    return Polyline(corners)


def _road_elements(path: _Path, tpl: SceneTemplate, prefix: str, rng, first_divider_dashed=True):
    half = tpl.num_lanes * tpl.lane_width / 2.0
    elements = [
        MapElement(f"{prefix}bd-left", ElementClass.BOUNDARY, _offset_polyline(path, half, tpl.length)),
        MapElement(f"{prefix}bd-right", ElementClass.BOUNDARY, _offset_polyline(path, -half, tpl.length)),
    ]
    for k in range(1, tpl.num_lanes):
        offset = -half + k * tpl.lane_width
        dashed = (k % 2 == 1) == first_divider_dashed
        cls = ElementClass.DIVIDER_DASHED if dashed else ElementClass.DIVIDER_SOLID
        elements.append(MapElement(f"{prefix}div-{k}", cls, _offset_polyline(path, offset, tpl.length)))
    for k in range(tpl.num_lanes):
        offset = -half + (k + 0.5) * tpl.lane_width
        elements.append(
            MapElement(f"{prefix}cen-{k}", ElementClass.CENTERLINE, _offset_polyline(path, offset, tpl.length))
        )
    phase = PED_SPACING / 4.0 + float(rng.uniform(0.0, PED_SPACING / 2.0))
    s0 = phase
    idx = 0
    while s0 + PED_LENGTH <= tpl.length:
        elements.append(
            MapElement(f"{prefix}ped-{idx}", ElementClass.PED_CROSSING, _ped_crossing(path, s0, half))
        )
        s0 += PED_SPACING
        idx += 1
    return elements


def _ego_trajectory(path: _Path, tpl: SceneTemplate, scene_id: str) -> Trajectory:
    half = tpl.num_lanes * tpl.lane_width / 2.0
    ego_offset = -half + ((tpl.num_lanes - 1) // 2 + 0.5) * tpl.lane_width
    step = SPEED / SAMPLE_HZ
    # constant speed along the ego lane; its arc maps back to centerline s
    lane_scale = 1.0 - ego_offset * path.curvature
    poses = []
    i = 0
    while True:
        s = (i * step) / lane_scale
        if s > tpl.length + 1e-9:
            break
        x, y = path.point(s, ego_offset)
        poses.append(Pose2D(i / SAMPLE_HZ, x, y, path.heading(s)))
        i += 1
    return Trajectory(tuple(poses), scene_id)


def build_scene(tpl: SceneTemplate) -> tuple[GlobalMap, Trajectory]:
    """Generate a (map, trajectory) pair; identical for identical templates."""
    rng = np.random.default_rng(tpl.seed)
    origin = rng.uniform(-1000.0, 1000.0, size=2)
    scene_id = f"{tpl.kind}-{tpl.seed}"

    if tpl.kind == "straight_road":
        path = _Path(origin, 0.0)
        elements = _road_elements(path, tpl, "", rng)
        traj = _ego_trajectory(path, tpl, scene_id)
    elif tpl.kind == "curved_road":
        # quarter turn over the full length
        path = _Path(origin, (math.pi / 2.0) / tpl.length)
        elements = _road_elements(path, tpl, "", rng)
        traj = _ego_trajectory(path, tpl, scene_id)
    else:  # intersection: two straight roads crossing mid-length
        half_len = tpl.length / 2.0
        path_a = _Path(origin - np.array([half_len, 0.0]), 0.0)
        elements = _road_elements(path_a, tpl, "a-", rng)
        # the crossing road runs along +Y through the intersection center
        path_b = _RotatedPath(origin, math.pi / 2.0, half_len)
        elements += _road_elements(path_b, tpl, "b-", rng, first_divider_dashed=False)
        traj = _ego_trajectory(path_a, tpl, scene_id)

    return GlobalMap(scene_id, tuple(elements)), traj
