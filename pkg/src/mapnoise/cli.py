"""Command-line interface.

Subcommands:

* synth       build a synthetic map + trajectory
* distort     apply pose noise and regenerate clean/noisy label frames
* eval-ap     chamfer-threshold average precision between label files
* eval-rings  distance-aware ring metric between label files

Exit codes: 0 success, 2 configuration error, 3 data error. Every run is a
pure function of its inputs and flags; outputs are written atomically and a
resolved run config is stored next to them (or embedded, for the eval
commands).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import labelgen, metric, noise, synth
from .errors import ConfigError, DataError
from .geom import ElementClass
from .ioutil import atomic_write_text
from .metric import Prediction, RingSpec


def _add_range_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--x-range", nargs=2, type=float, default=list(labelgen.DEFAULT_X_RANGE),
        metavar=("LO", "HI"), help="perception range along ego X (default: -15 15)",
    )
    parser.add_argument(
        "--y-range", nargs=2, type=float, default=list(labelgen.DEFAULT_Y_RANGE),
        metavar=("LO", "HI"), help="perception range along ego Y (default: -30 30)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapnoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("--kind", choices=synth.SCENE_KINDS, default="straight_road")
    p_synth.add_argument("--lane-width", type=float, default=3.5)
    p_synth.add_argument("--length", type=float, default=100.0)
    p_synth.add_argument("--num-lanes", type=int, default=2)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out-map", type=Path, required=True)
    p_synth.add_argument("--out-traj", type=Path, required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_dist = sub.add_parser("distort", help="apply pose noise and write label pairs")
    p_dist.add_argument("--map", dest="map_path", type=Path, required=True)
    p_dist.add_argument("--traj", dest="traj_path", type=Path, required=True)
    p_dist.add_argument("--out-dir", type=Path, required=True)
    p_dist.add_argument("--noise-config", type=Path, help="JSON NoiseConfig file; flags override")
    p_dist.add_argument("--kind", choices=noise.NOISE_KINDS)
    p_dist.add_argument("--eps-l", type=float, help="max translation offset, meters")
    p_dist.add_argument("--eps-r", type=float, help="max heading offset, degrees")
    p_dist.add_argument("--sigma-l", type=float, help="gaussian translation stddev, meters")
    p_dist.add_argument("--sigma-r", type=float, help="gaussian heading stddev, degrees")
    p_dist.add_argument("--gamma", type=float, help="perlin step length")
    p_dist.add_argument("--octave", type=int, help="perlin lattice cells")
    p_dist.add_argument("--noise-ratio", type=float, help="fraction of scenes altered")
    p_dist.add_argument(
        "--heading-correction", action=argparse.BooleanOptionalAction, default=None,
        help="re-derive headings from the noisy driving direction",
    )
    p_dist.add_argument("--ramp-min", type=float, help="ramp interval lower bound, seconds")
    p_dist.add_argument("--ramp-max", type=float, help="ramp interval upper bound, seconds")
    p_dist.add_argument("--nr-mode", choices=noise.NR_MODES)
    p_dist.add_argument("--seed", type=int, required=True)
    _add_range_flags(p_dist)
    p_dist.set_defaults(func=cmd_distort)

    p_ap = sub.add_parser("eval-ap", help="average precision between GT and prediction files")
    p_ap.add_argument("--gt", type=Path, required=True)
    p_ap.add_argument("--pred", type=Path, required=True)
    p_ap.add_argument("--out", type=Path, required=True)
    p_ap.set_defaults(func=cmd_eval_ap)

    p_rings = sub.add_parser("eval-rings", help="distance-aware ring metric between label files")
    p_rings.add_argument("--gt", type=Path, required=True)
    p_rings.add_argument("--other", type=Path, required=True)
    p_rings.add_argument("--ring-width", type=float, default=5.0)
    p_rings.add_argument("--num-rings", type=int, default=7)
    p_rings.add_argument(
        "--series", choices=("gt_distortion", "prediction"), default=None,
        help="series label; defaults to 'prediction' when the file carries confidences",
    )
    p_rings.add_argument("--out-json", type=Path, required=True)
    p_rings.add_argument("--out-csv", type=Path, required=True)
    p_rings.set_defaults(func=cmd_eval_rings)

    return parser


def cmd_synth(args) -> None:
    tpl = synth.SceneTemplate(
        kind=args.kind,
        lane_width=args.lane_width,
        length=args.length,
        num_lanes=args.num_lanes,
        seed=args.seed,
    )
    global_map, traj = synth.build_scene(tpl)
    labelgen.save_map(global_map, args.out_map)
    noise.save_trajectory(traj, args.out_traj)
    run_config = {
        "command": "synth",
        "template": {
            "kind": tpl.kind,
            "lane_width": tpl.lane_width,
            "length": tpl.length,
            "num_lanes": tpl.num_lanes,
            "seed": tpl.seed,
        },
        "out_map": str(args.out_map),
        "out_traj": str(args.out_traj),
    }
    run_path = args.out_map.with_name(args.out_map.stem + "_run.json")
    atomic_write_text(run_path, json.dumps(run_config, indent=2) + "\n")


def _resolve_noise_config(args) -> noise.NoiseConfig:
    base = noise.load_noise_config(args.noise_config).to_dict() if args.noise_config else {}
    overrides = {
        "kind": args.kind,
        "eps_l": args.eps_l,
        "eps_r": args.eps_r,
        "sigma_l": args.sigma_l,
        "sigma_r": args.sigma_r,
        "gamma": args.gamma,
        "octave": args.octave,
        "noise_ratio": args.noise_ratio,
        "heading_correction": args.heading_correction,
        "nr_mode": args.nr_mode,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    interval = list(base.get("ramp_interval", (4.0, 10.0)))
    if args.ramp_min is not None:
        interval[0] = args.ramp_min
    if args.ramp_max is not None:
        interval[1] = args.ramp_max
    base["ramp_interval"] = tuple(interval)
    base["seed"] = args.seed
    return noise.NoiseConfig.from_dict(base)


def cmd_distort(args) -> None:
    cfg = _resolve_noise_config(args)
    # fail on inconsistent flags before any file is touched
    if cfg.heading_correction and cfg.kind == "gaussian":
        raise ConfigError("heading correction is only supported for ramp and perlin noise")
    global_map = labelgen.load_map(args.map_path)
    traj = noise.load_trajectory(args.traj_path)
    x_range = tuple(args.x_range)
    y_range = tuple(args.y_range)

    noisy_traj = noise.apply_noise(traj, cfg)
    clean_frames = labelgen.generate_labels(global_map, traj, x_range, y_range)
    noisy_frames = labelgen.generate_labels(global_map, noisy_traj, x_range, y_range)

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    noise.save_trajectory(noisy_traj, out / "noisy_traj.json")
    labelgen.save_frames(clean_frames, out / "clean_labels.jsonl")
    labelgen.save_frames(noisy_frames, out / "noisy_labels.jsonl")
    run_config = {
        "command": "distort",
        "map": str(args.map_path),
        "traj": str(args.traj_path),
        "noise": cfg.to_dict(),
        "x_range": list(x_range),
        "y_range": list(y_range),
    }
    atomic_write_text(out / "run_config.json", json.dumps(run_config, indent=2) + "\n")


def _load_aligned(gt_path: Path, other_path: Path):
    gt_records, _ = labelgen.load_frames_with_confidence(gt_path)
    other_records, has_conf = labelgen.load_frames_with_confidence(other_path)
    gt_by_key = {(f.scene_id, f.frame_index): (f, c) for f, c in gt_records}
    other_by_key = {(f.scene_id, f.frame_index): (f, c) for f, c in other_records}
    missing_other = sorted(set(gt_by_key) - set(other_by_key))
    missing_gt = sorted(set(other_by_key) - set(gt_by_key))
    if missing_other or missing_gt:
        parts = []
        if missing_other:
            parts.append(f"frames missing from {other_path}: {missing_other[:20]}")
        if missing_gt:
            parts.append(f"frames missing from {gt_path}: {missing_gt[:20]}")
        raise DataError("; ".join(parts))
    keys = sorted(gt_by_key)
    return keys, gt_by_key, other_by_key, has_conf


def cmd_eval_ap(args) -> None:
    keys, gt_by_key, pred_by_key, _ = _load_aligned(args.gt, args.pred)
    frames = []
    for key in keys:
        gts = list(gt_by_key[key][0].elements)
        pred_frame, confs = pred_by_key[key]
        preds = [Prediction(e, c) for e, c in zip(pred_frame.elements, confs)]
        frames.append((gts, preds))
    result = metric.average_precision(frames)
    out = {}
    for cls in ElementClass:
        out[f"AP_{cls.short}"] = result["per_class"][cls.value]
    out["mAP"] = result["mAP"]
    out["per_class"] = result["per_class"]
    out["per_threshold"] = result["per_threshold"]
    out["excluded_classes"] = result["excluded_classes"]
    out["config"] = {"command": "eval-ap", "gt": str(args.gt), "pred": str(args.pred),
                     "thresholds": list(metric.DEFAULT_THRESHOLDS)}
    atomic_write_text(args.out, json.dumps(out, indent=2) + "\n")


def cmd_eval_rings(args) -> None:
    keys, gt_by_key, other_by_key, has_conf = _load_aligned(args.gt, args.other)
    spec = RingSpec(ring_width=args.ring_width, num_rings=args.num_rings)
    pairs = (
        (list(gt_by_key[key][0].elements), list(other_by_key[key][0].elements)) for key in keys
    )
    report = metric.ring_evaluate_frames(pairs, spec)
    series = args.series or ("prediction" if has_conf else "gt_distortion")
    payload = report.to_dict(series=series)
    payload["config"] = {
        "command": "eval-rings",
        "gt": str(args.gt),
        "other": str(args.other),
        "ring_width": spec.ring_width,
        "num_rings": spec.num_rings,
        "series": series,
    }
    atomic_write_text(args.out_json, json.dumps(payload, indent=2) + "\n")
    metric.write_ring_csv({series: report}, args.out_csv)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


def run() -> None:
    raise SystemExit(main())
