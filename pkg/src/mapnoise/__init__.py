"""mapnoise: localization-noise injection and distance-aware evaluation for
vectorized HD-map labels.

The package simulates pose noise (ramp, gaussian, perlin) on vehicle
trajectories, regenerates ego-frame map labels under the noisy poses, and
evaluates element sets with chamfer-threshold average precision and a
distance-aware ring metric.
"""

from .errors import ConfigError, DataError
from .geom import (
    ElementClass,
    MapElement,
    Polyline,
    Pose2D,
    clip_to_rect,
    normalize_angle,
    resample_max_spacing,
    signed_angle,
    transform_to_ego,
    transform_to_global,
)
from .labelgen import (
    DEFAULT_X_RANGE,
    DEFAULT_Y_RANGE,
    GlobalMap,
    LabelFrame,
    distorted_label_pair,
    generate_labels,
    load_frames,
    load_frames_with_confidence,
    load_map,
    save_frames,
    save_map,
)
from .metric import (
    DEFAULT_THRESHOLDS,
    Matching,
    Prediction,
    RingReport,
    RingSpec,
    aggregate_stats,
    average_precision,
    chamfer,
    match_elements,
    ring_evaluate,
    ring_evaluate_frames,
    split_into_rings,
    write_ring_csv,
)
from .noise import (
    NoiseConfig,
    Trajectory,
    apply_gaussian,
    apply_noise,
    apply_perlin,
    apply_ramp,
    heading_correct,
    load_noise_config,
    load_trajectory,
    sample_truncated_normal,
    save_noise_config,
    save_trajectory,
    scene_rng,
)
from .perlin import PerlinField
from .synth import SceneTemplate, build_scene

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "ElementClass",
    "MapElement",
    "Polyline",
    "Pose2D",
    "clip_to_rect",
    "normalize_angle",
    "resample_max_spacing",
    "signed_angle",
    "transform_to_ego",
    "transform_to_global",
    "DEFAULT_X_RANGE",
    "DEFAULT_Y_RANGE",
    "GlobalMap",
    "LabelFrame",
    "distorted_label_pair",
    "generate_labels",
    "load_frames",
    "load_frames_with_confidence",
    "load_map",
    "save_frames",
    "save_map",
    "DEFAULT_THRESHOLDS",
    "Matching",
    "Prediction",
    "RingReport",
    "RingSpec",
    "aggregate_stats",
    "average_precision",
    "chamfer",
    "match_elements",
    "ring_evaluate",
    "ring_evaluate_frames",
    "split_into_rings",
    "write_ring_csv",
    "NoiseConfig",
    "Trajectory",
    "apply_gaussian",
    "apply_noise",
    "apply_perlin",
    "apply_ramp",
    "heading_correct",
    "load_noise_config",
    "load_trajectory",
    "sample_truncated_normal",
    "save_noise_config",
    "save_trajectory",
    "scene_rng",
    "PerlinField",
    "SceneTemplate",
    "build_scene",
    "__version__",
]
