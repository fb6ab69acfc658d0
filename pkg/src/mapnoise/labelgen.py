"""Ego-frame label generation: local "cutouts" of a global vector map.

For every pose the global map is expressed in that pose's ego frame and
clipped to the perception rectangle; doing this under clean and noisy poses
yields the training-label pairs used by the distortion analysis.

File formats (all coordinates meters, written at millimeter precision):

map JSON     {"map_id": ..., "elements": [{"id", "class", "points": [[x, y], ...]}]}
frames JSONL one LabelFrame object per line:
             {"scene_id", "frame_index", "pose_used": {"t","x","y","theta"},
              "elements": [{"id", "class", "points", ("confidence")}]}

The optional per-element "confidence" is used by prediction files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geom import MapElement, Polyline, Pose2D, clip_to_rect, transform_to_ego
from .ioutil import atomic_write_text
from .noise import NoiseConfig, Trajectory, apply_noise

# default perception range: X is the +-15 m axis, Y the +-30 m axis
DEFAULT_X_RANGE = (-15.0, 15.0)
DEFAULT_Y_RANGE = (-30.0, 30.0)

_COORD_PRECISION = 3


@dataclass(frozen=True)
class GlobalMap:
    """All map elements of one scene in a global metric frame."""

    map_id: str
    elements: tuple[MapElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        ids = [e.id for e in self.elements]
        if len(set(ids)) != len(ids):
            raise ValueError("map element ids must be unique")


@dataclass(frozen=True)
class LabelFrame:
    """Ego-frame element set for one pose: one training sample."""

    scene_id: str
    frame_index: int
    pose_used: Pose2D
    elements: tuple[MapElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))


def generate_labels(
    global_map: GlobalMap,
    traj: Trajectory,
    x_range=DEFAULT_X_RANGE,
    y_range=DEFAULT_Y_RANGE,
) -> list[LabelFrame]:
    """Build one LabelFrame per pose.

    Elements are transformed to the pose's ego frame and clipped to the
    perception rectangle. An element cut into several pieces yields one
    MapElement per piece with "#k" id suffixes; frames with no surviving
    elements are kept so indices stay aligned across clean/noisy streams.
    """
    frames = []
    for idx, pose in enumerate(traj.poses):
        kept = []
        for element in global_map.elements:
            ego = transform_to_ego(element.geometry, pose)
            pieces = clip_to_rect(ego, x_range, y_range)
            if len(pieces) == 1:
                kept.append(MapElement(element.id, element.cls, pieces[0]))
            else:
                for k, piece in enumerate(pieces):
                    kept.append(MapElement(f"{element.id}#{k}", element.cls, piece))
        frames.append(LabelFrame(traj.scene_id, idx, pose, tuple(kept)))
    return frames


def distorted_label_pair(
    global_map: GlobalMap,
    traj: Trajectory,
    cfg: NoiseConfig,
    x_range=DEFAULT_X_RANGE,
    y_range=DEFAULT_Y_RANGE,
    rng: np.random.Generator | None = None,
) -> list[tuple[LabelFrame, LabelFrame]]:
    """Per-frame (clean, noisy) label pairs from one trajectory.

    The noisy side regenerates the cutout under the noise-altered poses; the
    pairs feed the ground-truth-distortion ring evaluation.
    """
    noisy_traj = apply_noise(traj, cfg, rng)
    clean = generate_labels(global_map, traj, x_range, y_range)
    noisy = generate_labels(global_map, noisy_traj, x_range, y_range)
    return list(zip(clean, noisy))


# ---------------------------------------------------------------------------
# serialization


def _points_to_jsonable(points: np.ndarray) -> list[list[float]] | None:
    """Round to millimeters and drop duplicates the rounding may create.

    Returns None when fewer than two distinct points survive (sub-millimeter
    slivers); callers drop such elements.
    """
    rounded = [[round(float(x), _COORD_PRECISION), round(float(y), _COORD_PRECISION)] for x, y in points]
    out = [rounded[0]]
    for pt in rounded[1:]:
        if pt != out[-1]:
            out.append(pt)
    return out if len(out) >= 2 else None


def _element_to_dict(element: MapElement, confidence: float | None = None) -> dict | None:
    pts = _points_to_jsonable(element.geometry.points)
    if pts is None:
        return None
    d = {"id": element.id, "class": element.cls.value, "points": pts}
    if confidence is not None:
        d["confidence"] = confidence
    return d


def _element_from_dict(d: dict) -> tuple[MapElement, float | None]:
    try:
        element = MapElement(str(d["id"]), d["class"], Polyline(d["points"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid element record: {exc}") from exc
    conf = d.get("confidence")
    return element, (float(conf) if conf is not None else None)


def map_to_dict(global_map: GlobalMap) -> dict:
    elements = []
    for e in global_map.elements:
        d = _element_to_dict(e)
        if d is not None:
            elements.append(d)
    return {"map_id": global_map.map_id, "elements": elements}


def map_from_dict(d: dict) -> GlobalMap:
    try:
        raw = d["elements"]
        map_id = str(d["map_id"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"invalid map record: missing {exc}") from exc
    elements = tuple(_element_from_dict(e)[0] for e in raw)
    try:
        return GlobalMap(map_id, elements)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def load_map(path) -> GlobalMap:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    return map_from_dict(raw)


def save_map(global_map: GlobalMap, path) -> None:
    atomic_write_text(path, json.dumps(map_to_dict(global_map)) + "\n")


def frame_to_dict(frame: LabelFrame, confidences=None) -> dict:
    pose = frame.pose_used
    elements = []
    for i, e in enumerate(frame.elements):
        conf = None if confidences is None else confidences[i]
        d = _element_to_dict(e, conf)
        if d is not None:
            elements.append(d)
    return {
        "scene_id": frame.scene_id,
        "frame_index": frame.frame_index,
        "pose_used": {
            "t": pose.t,
            "x": round(pose.x, _COORD_PRECISION),
            "y": round(pose.y, _COORD_PRECISION),
            "theta": pose.theta,
        },
        "elements": elements,
    }


def frame_from_dict(d: dict) -> tuple[LabelFrame, list[float | None]]:
    try:
        pose = d["pose_used"]
        pose_used = Pose2D(pose["t"], pose["x"], pose["y"], pose.get("theta", 0.0))
        scene_id = str(d["scene_id"])
        frame_index = int(d["frame_index"])
        raw_elements = d["elements"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid frame record: {exc}") from exc
    elements = []
    confidences = []
    for raw in raw_elements:
        element, conf = _element_from_dict(raw)
        elements.append(element)
        confidences.append(conf)
    frame = LabelFrame(scene_id, frame_index, pose_used, tuple(elements))
    return frame, confidences


def save_frames(frames, path, confidences=None) -> None:
    """Write frames as JSON-lines; optional per-frame confidence lists."""
    lines = []
    for i, frame in enumerate(frames):
        conf = None if confidences is None else confidences[i]
        lines.append(json.dumps(frame_to_dict(frame, conf)))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def load_frames(path) -> list[LabelFrame]:
    return [frame for frame, _ in load_frames_with_confidence(path)[0]]


def load_frames_with_confidence(path):
    """Read a frames JSONL file.

    Returns (records, any_confidence) where records is a list of
    (LabelFrame, confidences) with missing confidences defaulting to 1.0, and
    any_confidence tells whether the file carried explicit scores (used to
    distinguish prediction files from plain label files).
    """
    records = []
    any_confidence = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            try:
                frame, confs = frame_from_dict(raw)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if any(c is not None for c in confs):
                any_confidence = True
            records.append((frame, [1.0 if c is None else c for c in confs]))
    return records, any_confidence
