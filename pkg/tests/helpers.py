"""Shared builders and independent oracles for the test suite.

The oracle implementations here are deliberately plain double loops so they
stay independent of the vectorized library code they check.
"""

from __future__ import annotations

import math

import numpy as np

from mapnoise import ElementClass, MapElement, Polyline, Pose2D, Trajectory
from mapnoise.geom import resample_max_spacing

CLASSES = list(ElementClass)


def element(eid: str, cls, pts) -> MapElement:
    return MapElement(eid, cls, Polyline(pts))


def line_x(eid: str, cls, y: float, x0: float, x1: float, step: float = 2.0) -> MapElement:
    n = max(2, int(round((x1 - x0) / step)) + 1)
    xs = np.linspace(x0, x1, n)
    return element(eid, cls, np.column_stack([xs, np.full(n, y)]))


def straight_traj(n: int, scene_id: str = "s", step: float = 1.0, y: float = 0.0,
                  theta: float = 0.0, hz: float = 10.0) -> Trajectory:
    poses = tuple(Pose2D(i / hz, i * step, y, theta) for i in range(n))
    return Trajectory(poses, scene_id)


def shift_traj(traj: Trajectory, dx: float = 0.0, dy: float = 0.0, dtheta: float = 0.0) -> Trajectory:
    poses = tuple(Pose2D(p.t, p.x + dx, p.y + dy, p.theta + dtheta) for p in traj.poses)
    return Trajectory(poses, traj.scene_id)


def random_polyline(rng: np.random.Generator, n_min: int = 3, n_max: int = 8,
                    box: float = 25.0) -> Polyline:
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        pts = rng.uniform(-box, box, size=(n, 2))
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if steps.min() > 1e-6:
            return Polyline(pts)


def brute_chamfer(pa: np.ndarray, pb: np.ndarray) -> float:
    """O(n^2) symmetric chamfer via explicit loops."""

    def directed(src, dst):
        total = 0.0
        for p in src:
            best = math.inf
            for q in dst:
                d = math.hypot(p[0] - q[0], p[1] - q[1])
                if d < best:
                    best = d
            total += best
        return total / len(src)

    return 0.5 * (directed(pa, pb) + directed(pb, pa))


def brute_chamfer_polylines(a: Polyline, b: Polyline, max_spacing: float = 1.0) -> float:
    pa = resample_max_spacing(a, max_spacing).points
    pb = resample_max_spacing(b, max_spacing).points
    return brute_chamfer(pa, pb)


def rotate_points(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T
