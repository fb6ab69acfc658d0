"""Pose-noise generators and scheduling.

Three noise patterns model real localization failure modes:

* ramp     -- offset grows linearly from zero over a random 4-10 s interval,
              then snaps back (GNSS dropout and relock).
* gaussian -- independent truncated-normal offset per pose (raw unfiltered GNSS).
* perlin   -- smooth spatially-correlated offset (stable but badly tuned filter).

Optionally the heading is re-derived from the noisy displacement direction
("heading correction"). All generators are deterministic functions of
(input, config, seed). Angles inside this module are radians; NoiseConfig
carries degrees because it is the config-file boundary.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, DataError
from .geom import Pose2D, normalize_angle, signed_angle
from .ioutil import atomic_write_text
from .perlin import PerlinField

NOISE_KINDS = ("ramp", "gaussian", "perlin", "none")
NR_MODES = ("scene", "frame")

# the lattice frequency is expressed relative to this default step length, so
# the stock gamma=1000 / octave=10 pair yields octave cells across a scene
GAMMA_REFERENCE = 1000.0


@dataclass(frozen=True)
class NoiseConfig:
    """Noise type plus parameters; degrees for angular fields, meters otherwise."""

    kind: str = "none"
    eps_l: float = 0.0            # max translation offset, meters
    eps_r: float = 0.0            # max heading offset, degrees
    sigma_l: float = 0.0          # gaussian translation stddev, meters
    sigma_r: float = 0.0          # gaussian heading stddev, degrees
    gamma: float = 1000.0         # perlin step length
    octave: int = 10              # perlin lattice cells
    noise_ratio: float = 1.0      # fraction of scenes altered (NR)
    heading_correction: bool = False
    ramp_interval: tuple[float, float] = (4.0, 10.0)
    nr_mode: str = "scene"        # "scene": NR decides whole scenes; "frame": per pose
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}, expected one of {NOISE_KINDS}")
        if self.nr_mode not in NR_MODES:
            raise ConfigError(f"unknown nr_mode {self.nr_mode!r}, expected one of {NR_MODES}")
        for name in ("eps_l", "eps_r", "sigma_l", "sigma_r"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.noise_ratio <= 1.0:
            raise ConfigError("noise_ratio must be within [0, 1]")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if int(self.octave) < 1:
            raise ConfigError("octave must be a positive integer")
        object.__setattr__(self, "octave", int(self.octave))
        interval = tuple(float(v) for v in self.ramp_interval)
        if len(interval) != 2 or interval[0] < 0 or interval[0] > interval[1]:
            raise ConfigError("ramp_interval must satisfy 0 <= min <= max")
        object.__setattr__(self, "ramp_interval", interval)
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["ramp_interval"] = list(self.ramp_interval)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown noise config keys: {sorted(unknown)}")
        return cls(**d)


def load_noise_config(path) -> NoiseConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: noise config must be a JSON object")
    return NoiseConfig.from_dict(raw)


def save_noise_config(cfg: NoiseConfig, path) -> None:
    atomic_write_text(path, json.dumps(cfg.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class Trajectory:
    """Ordered pose sequence for one scene; timestamps strictly increasing."""

    poses: tuple[Pose2D, ...]
    scene_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        times = [p.t for p in self.poses]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trajectory timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.poses], dtype=float).reshape(-1, 2)

    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.poses], dtype=float)

    def headings(self) -> np.ndarray:
        return np.array([p.theta for p in self.poses], dtype=float)


def trajectory_to_dict(traj: Trajectory, precision: int = 3) -> dict:
    return {
        "scene_id": traj.scene_id,
        "poses": [
            {"t": p.t, "x": round(p.x, precision), "y": round(p.y, precision), "theta": p.theta}
            for p in traj.poses
        ],
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    try:
        poses = tuple(Pose2D(p["t"], p["x"], p["y"], p.get("theta", 0.0)) for p in d["poses"])
        return Trajectory(poses, str(d.get("scene_id", "")))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid trajectory record: {exc}") from exc


def load_trajectory(path) -> Trajectory:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    return trajectory_from_dict(raw)


def save_trajectory(traj: Trajectory, path) -> None:
    atomic_write_text(path, json.dumps(trajectory_to_dict(traj)) + "\n")


def scene_rng(seed: int, scene_id: str) -> np.random.Generator:
    """Per-scene generator derived from (seed, scene_id).

    The sub-seed comes from a stable hash so results do not depend on the
    order in which scenes are processed (or on Python's salted hash()).
    """
    digest = hashlib.sha256(f"{seed}|{scene_id}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def sample_truncated_normal(rng: np.random.Generator, sigma: float, bound: float) -> float:
    """Rejection-sample N(0, sigma^2) restricted to [-bound, bound].

    sigma == 0 is the degenerate normal (all mass at 0) and bound == 0 leaves
    only {0} as support, so both return exactly 0.0 without drawing.
    """
    if sigma <= 0.0 or bound <= 0.0:
        return 0.0
    while True:
        value = float(rng.normal(0.0, sigma))
        if -bound <= value <= bound:
            return value


def _require_kind(cfg: NoiseConfig, kind: str) -> None:
    if cfg.kind != kind:
        raise ConfigError(f"expected kind={kind!r}, got {cfg.kind!r}")


def _require_poses(traj: Trajectory) -> None:
    if len(traj.poses) == 0:
        raise ValueError("empty trajectory")


def apply_ramp(traj: Trajectory, cfg: NoiseConfig, rng: np.random.Generator) -> Trajectory:
    """Ramp noise: per random interval the offset grows linearly from zero.

    For each interval [t_n, t_n+1) with t_n+1 - t_n ~ U(ramp_interval) the
    target offset is (cos(a) T, sin(a) T, th) with a ~ U(0, 360deg),
    T ~ U(0, eps_l), th ~ U(-eps_r, eps_r), scaled by the ramp
    (t - t_n) / (t_n+1 - t_n). A new interval is drawn as soon as the
    previous one is exceeded, which resets the offset to zero.
    """
    _require_kind(cfg, "ramp")
    _require_poses(traj)
    eps_r_rad = math.radians(cfg.eps_r)
    lo, hi = cfg.ramp_interval

    def draw_interval(t_n: float):
        t_next = t_n + float(rng.uniform(lo, hi))
        alpha = float(rng.uniform(0.0, 2.0 * math.pi))
        trans = float(rng.uniform(0.0, cfg.eps_l))
        dtheta = float(rng.uniform(-eps_r_rad, eps_r_rad))
        return t_next, alpha, trans, dtheta

    t_n = traj.poses[0].t
    t_next, alpha, trans, dtheta = draw_interval(t_n)
    out = []
    for pose in traj.poses:
        while pose.t >= t_next:
            t_n = t_next
            t_next, alpha, trans, dtheta = draw_interval(t_n)
        ramp = (pose.t - t_n) / (t_next - t_n)
        out.append(
            Pose2D(
                pose.t,
                pose.x + math.cos(alpha) * trans * ramp,
                pose.y + math.sin(alpha) * trans * ramp,
                pose.theta + dtheta * ramp,
            )
        )
    return Trajectory(tuple(out), traj.scene_id)


def apply_gaussian(traj: Trajectory, cfg: NoiseConfig, rng: np.random.Generator) -> Trajectory:
    """Truncated-Gaussian noise, independently per pose.

    T ~ N(0, sigma_l^2) truncated to [-eps_l, eps_l], theta offset likewise
    with sigma_r / eps_r, translation direction a ~ U(0, 180deg). The signed
    T together with the half-range direction covers the full plane.
    """
    _require_kind(cfg, "gaussian")
    _require_poses(traj)
    eps_r_rad = math.radians(cfg.eps_r)
    sigma_r_rad = math.radians(cfg.sigma_r)
    out = []
    for pose in traj.poses:
        trans = sample_truncated_normal(rng, cfg.sigma_l, cfg.eps_l)
        dtheta = sample_truncated_normal(rng, sigma_r_rad, eps_r_rad)
        alpha = float(rng.uniform(0.0, math.pi))
        out.append(
            Pose2D(
                pose.t,
                pose.x + math.cos(alpha) * trans,
                pose.y + math.sin(alpha) * trans,
                pose.theta + dtheta,
            )
        )
    return Trajectory(tuple(out), traj.scene_id)


def apply_perlin(traj: Trajectory, cfg: NoiseConfig, rng: np.random.Generator) -> Trajectory:
    """Smooth wavelike noise from three independent gradient-noise fields.

    Scene coordinates are normalized to [0, 1]^2 by the trajectory bounding
    box and looked up in per-channel Perlin fields at frequency
    (gamma / 1000) * octave, so the defaults place `octave` lattice cells
    across the scene. Field values in [-1, 1] scale by eps_l (x, y) and
    eps_r (heading).
    """
    _require_kind(cfg, "perlin")
    _require_poses(traj)
    pos = traj.positions()
    mins = pos.min(axis=0)
    extent = pos.max(axis=0) - mins
    if float(extent.max()) <= 1e-9:
        raise ValueError("degenerate trajectory bounding box (all poses coincident)")
    norm = np.zeros_like(pos)
    for axis in (0, 1):
        if extent[axis] > 1e-9:
            norm[:, axis] = (pos[:, axis] - mins[axis]) / extent[axis]

    scale = (cfg.gamma / GAMMA_REFERENCE) * cfg.octave
    seeds = rng.integers(0, 2**63, size=3)
    field_x = PerlinField(int(seeds[0]))
    field_y = PerlinField(int(seeds[1]))
    field_t = PerlinField(int(seeds[2]))

    lx = norm[:, 0] * scale
    ly = norm[:, 1] * scale
    dx = cfg.eps_l * field_x.sample(lx, ly)
    dy = cfg.eps_l * field_y.sample(lx, ly)
    dth = math.radians(cfg.eps_r) * field_t.sample(lx, ly)

    out = tuple(
        Pose2D(p.t, p.x + float(dx[i]), p.y + float(dy[i]), p.theta + float(dth[i]))
        for i, p in enumerate(traj.poses)
    )
    return Trajectory(out, traj.scene_id)


def heading_correct(original: Trajectory, noised: Trajectory) -> Trajectory:
    """Re-derive headings from the noisy displacement direction.

    theta_i becomes theta_gt_i plus the signed angle between the original and
    noisy forward displacements p(t_i+1) - p(t_i); the last pose reuses the
    final displacement. Positions are left untouched.
    """
    n = len(original.poses)
    if n != len(noised.poses):
        raise ValueError("trajectories must have the same length")
    if n < 2:
        raise ValueError("heading correction needs at least two poses")
    for a, b in zip(original.poses, noised.poses):
        if a.t != b.t:
            raise ValueError("trajectory timestamps do not match")

    disp_orig = np.diff(original.positions(), axis=0)
    disp_noise = np.diff(noised.positions(), axis=0)
    deltas = []
    for i in range(n - 1):
        if np.linalg.norm(disp_orig[i]) <= 1e-12 or np.linalg.norm(disp_noise[i]) <= 1e-12:
            raise ValueError(f"degenerate displacement at {i}")
        deltas.append(signed_angle(disp_orig[i], disp_noise[i]))
    deltas.append(deltas[-1])

    out = tuple(
        Pose2D(pn.t, pn.x, pn.y, normalize_angle(po.theta + deltas[i]))
        for i, (po, pn) in enumerate(zip(original.poses, noised.poses))
    )
    return Trajectory(out, noised.scene_id)


_GENERATORS = {
    "ramp": apply_ramp,
    "gaussian": apply_gaussian,
    "perlin": apply_perlin,
}


def apply_noise(traj: Trajectory, cfg: NoiseConfig, rng: np.random.Generator | None = None) -> Trajectory:
    """Apply the configured noise to a scene trajectory.

    With nr_mode="scene" a single Bernoulli(noise_ratio) draw decides whether
    the whole scene is altered; with "frame" each pose is decided on its own.
    Heading correction runs afterwards for ramp and perlin; combining it with
    gaussian noise is rejected. kind="none" is the identity regardless of the
    other parameters.
    """
    if cfg.heading_correction and cfg.kind == "gaussian":
        raise ConfigError("heading correction is only supported for ramp and perlin noise")
    if cfg.kind == "none":
        return traj
    _require_poses(traj)
    if rng is None:
        rng = scene_rng(cfg.seed, traj.scene_id)

    if cfg.nr_mode == "scene":
        if not (float(rng.random()) < cfg.noise_ratio):
            return traj
        noised = _GENERATORS[cfg.kind](traj, cfg, rng)
    else:
        mask = rng.random(len(traj.poses)) < cfg.noise_ratio
        noised_full = _GENERATORS[cfg.kind](traj, cfg, rng)
        poses = tuple(
            noised_full.poses[i] if mask[i] else traj.poses[i] for i in range(len(traj.poses))
        )
        noised = Trajectory(poses, traj.scene_id)

    if cfg.heading_correction:
        noised = heading_correct(traj, noised)
    return noised
