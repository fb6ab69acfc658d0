"""Map-construction metrics: chamfer distance, chamfer-threshold AP, and the
distance-aware ring metric.

The ring metric partitions the ego surroundings into annuli ("rings") of
equal width and collects, per ring, the symmetric chamfer distance between
matched element pairs restricted to that ring. Elements are upsampled to at
most 1 m spacing first; an element spanning several rings is split into
sub-elements at the ring borders and the sub-elements are re-assigned within
the pair by minimum chamfer, bounded by the ring's outer radius. Ring
membership is half-open: a point at radius exactly k*w belongs to ring k.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import ConfigError
from .geom import ElementClass, MapElement, Polyline, resample_max_spacing
from .ioutil import atomic_write_text

DEFAULT_THRESHOLDS = (0.5, 1.0, 1.5)
DEFAULT_MAX_SPACING = 1.0

_REJECTED = 1e18


@dataclass(frozen=True)
class Prediction:
    """A predicted map element with a confidence score in [0, 1]."""

    element: MapElement
    confidence: float

    def __post_init__(self):
        conf = float(self.confidence)
        if not np.isfinite(conf) or not 0.0 <= conf <= 1.0:
            raise ValueError("confidence must be finite and within [0, 1]")
        object.__setattr__(self, "confidence", conf)


@dataclass(frozen=True)
class RingSpec:
    """Contiguous annuli [k*w, (k+1)*w) for k = 0..num_rings-1, centered on ego."""

    ring_width: float = 5.0
    num_rings: int = 7

    def __post_init__(self):
        if self.ring_width <= 0:
            raise ConfigError("ring_width must be positive")
        if int(self.num_rings) < 1:
            raise ConfigError("num_rings must be a positive integer")
        object.__setattr__(self, "ring_width", float(self.ring_width))
        object.__setattr__(self, "num_rings", int(self.num_rings))

    def outer_radius(self, ring: int) -> float:
        return (ring + 1) * self.ring_width

    def mid_radius(self, ring: int) -> float:
        return (ring + 0.5) * self.ring_width


def aggregate_stats(entries) -> dict:
    """Box-plot statistics with linear-interpolation quantiles.

    An empty list yields {"count": 0} with the remaining fields absent.
    """
    values = np.asarray(list(entries), dtype=float)
    if values.size == 0:
        return {"count": 0}
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "q1": float(np.percentile(values, 25)),
        "q3": float(np.percentile(values, 75)),
        "min": float(values.min()),
        "max": float(values.max()),
    }


@dataclass
class RingReport:
    """Per-ring chamfer entries plus derived statistics."""

    spec: RingSpec
    entries: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            self.entries = [[] for _ in range(self.spec.num_rings)]
        if len(self.entries) != self.spec.num_rings:
            raise ValueError("entries length must equal num_rings")

    def stats(self) -> list[dict]:
        return [aggregate_stats(e) for e in self.entries]

    def merge(self, other: "RingReport") -> "RingReport":
        """Concatenate entries ring-wise; associative, so frame evaluations
        can be reduced in parallel without changing the statistics."""
        if other.spec != self.spec:
            raise ValueError("cannot merge ring reports with different specs")
        merged = [a + b for a, b in zip(self.entries, other.entries)]
        return RingReport(self.spec, merged)

    def to_dict(self, series: str | None = None, include_entries: bool = True) -> dict:
        rings = []
        for k, stat in enumerate(self.stats()):
            row = {"ring_index": k, **stat}
            if include_entries:
                row["entries"] = list(self.entries[k])
            rings.append(row)
        out = {
            "ring_width": self.spec.ring_width,
            "num_rings": self.spec.num_rings,
            "rings": rings,
        }
        if series is not None:
            out["series"] = series
        return out


_CSV_FIELDS = ("ring_index", "series", "count", "mean", "median", "q1", "q3", "min", "max")


def write_ring_csv(reports: dict[str, RingReport], path) -> None:
    """Flat per-ring statistics CSV suitable for external box-plot tooling."""
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_CSV_FIELDS)
    writer.writeheader()
    for series, report in reports.items():
        for k, stat in enumerate(report.stats()):
            row = {"ring_index": k, "series": series}
            row.update({key: stat.get(key, "") for key in _CSV_FIELDS[2:]})
            writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# chamfer distance and element matching


def _chamfer_points(pa: np.ndarray, pb: np.ndarray) -> float:
    """Symmetric chamfer between two point sets: the two directed mean
    nearest-neighbor distances, averaged."""
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("chamfer distance needs non-empty point sets")
    dm = cdist(pa, pb)
    return 0.5 * (float(dm.min(axis=1).mean()) + float(dm.min(axis=0).mean()))


class _ResampleCache:
    """Per-evaluation cache of upsampled element point sets."""

    def __init__(self, max_spacing: float):
        self.max_spacing = max_spacing
        self._store: dict[int, np.ndarray] = {}

    def points(self, element: MapElement) -> np.ndarray:
        key = id(element)
        pts = self._store.get(key)
        if pts is None:
            pts = resample_max_spacing(element.geometry, self.max_spacing).points
            self._store[key] = pts
        return pts


def chamfer(a: Polyline, b: Polyline, max_spacing: float | None = DEFAULT_MAX_SPACING) -> float:
    """Symmetric point-set chamfer distance between two polylines.

    Both polylines are resampled to at most `max_spacing` (pass None when the
    caller already did).
    """
    if max_spacing is not None:
        a = resample_max_spacing(a, max_spacing)
        b = resample_max_spacing(b, max_spacing)
    return _chamfer_points(a.points, b.points)


@dataclass
class Matching:
    """Outcome of a one-to-one minimum-cost assignment."""

    pairs: list[tuple[int, int, float]]
    unmatched_gt: list[int]
    unmatched_other: list[int]

    def total_cost(self) -> float:
        return float(sum(c for _, _, c in self.pairs))


def _assign(cost: np.ndarray, max_cost: float | None) -> list[tuple[int, int, float]]:
    work = cost
    if max_cost is not None:
        work = np.where(cost > max_cost, _REJECTED, cost)
    rows, cols = linear_sum_assignment(work)
    out = []
    for r, c in zip(rows, cols):
        value = float(cost[r, c])
        if max_cost is not None and value > max_cost:
            continue
        out.append((int(r), int(c), value))
    return out


def match_elements(
    gts,
    others,
    max_cost: float | None = None,
    max_spacing: float = DEFAULT_MAX_SPACING,
    cache: _ResampleCache | None = None,
) -> Matching:
    """Optimal one-to-one assignment between two element sets by chamfer cost.

    Matching is restricted to elements of the same class. Pairs with chamfer
    above `max_cost` (when given) stay unmatched.
    """
    cache = cache or _ResampleCache(max_spacing)
    by_class_gt: dict[ElementClass, list[int]] = {}
    by_class_other: dict[ElementClass, list[int]] = {}
    for i, e in enumerate(gts):
        by_class_gt.setdefault(e.cls, []).append(i)
    for i, e in enumerate(others):
        by_class_other.setdefault(e.cls, []).append(i)

    pairs: list[tuple[int, int, float]] = []
    matched_gt: set[int] = set()
    matched_other: set[int] = set()
    for cls in sorted(set(by_class_gt) | set(by_class_other), key=lambda c: c.value):
        gi = by_class_gt.get(cls, [])
        oi = by_class_other.get(cls, [])
        if not gi or not oi:
            continue
        cost = np.empty((len(gi), len(oi)))
        for r, g in enumerate(gi):
            pg = cache.points(gts[g])
            for c, o in enumerate(oi):
                cost[r, c] = _chamfer_points(pg, cache.points(others[o]))
        for r, c, value in _assign(cost, max_cost):
            pairs.append((gi[r], oi[c], value))
            matched_gt.add(gi[r])
            matched_other.add(oi[c])

    return Matching(
        pairs=sorted(pairs),
        unmatched_gt=[i for i in range(len(gts)) if i not in matched_gt],
        unmatched_other=[i for i in range(len(others)) if i not in matched_other],
    )


# ---------------------------------------------------------------------------
# average precision


def _ap_all_points(tp_flags: np.ndarray, total_gt: int) -> float:
    """All-points interpolated AP from confidence-ordered TP/FP flags."""
    if len(tp_flags) == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(~tp_flags)
    recall = tp / total_gt
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    changed = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[changed] - mrec[changed - 1]) * mpre[changed]))


def average_precision(frames, thresholds=DEFAULT_THRESHOLDS) -> dict:
    """Chamfer-threshold AP over a set of frames.

    `frames` is a sequence of (gts, preds) with gts a list of MapElement and
    preds a list of Prediction, all in the frame's ego coordinates.
    Per class and threshold, predictions are taken in descending confidence
    and greedily matched to the unmatched ground-truth element with smallest
    chamfer distance; a match at or below the threshold is a true positive.
    The per-class AP is the mean over the thresholds, and mAP the mean over
    classes that have at least one ground-truth element (others are excluded
    with a warning).

    Returns {"per_class": {class: AP or None}, "per_threshold": {...},
    "mAP": float, "excluded_classes": [...]}.
    """
    thresholds = tuple(float(t) for t in thresholds)
    cache = _ResampleCache(DEFAULT_MAX_SPACING)

    total_gt = {cls: 0 for cls in ElementClass}
    # per class: list of (confidence, order, frame_idx, cost row to that frame's gts)
    pred_records: dict[ElementClass, list] = {cls: [] for cls in ElementClass}

    for f_idx, (gts, preds) in enumerate(frames):
        gt_by_class: dict[ElementClass, list[MapElement]] = {}
        for e in gts:
            gt_by_class.setdefault(e.cls, []).append(e)
        for cls, elems in gt_by_class.items():
            total_gt[cls] += len(elems)
        for pred in preds:
            cls = pred.element.cls
            gt_elems = gt_by_class.get(cls, [])
            pp = cache.points(pred.element)
            costs = np.array([_chamfer_points(cache.points(g), pp) for g in gt_elems])
            pred_records[cls].append((pred.confidence, len(pred_records[cls]), f_idx, costs))

    per_threshold: dict[float, dict[str, float | None]] = {t: {} for t in thresholds}
    per_class: dict[str, float | None] = {}
    excluded = []

    for cls in ElementClass:
        records = pred_records[cls]
        if total_gt[cls] == 0:
            per_class[cls.value] = None
            for t in thresholds:
                per_threshold[t][cls.value] = None
            excluded.append(cls.value)
            continue
        confs = np.array([r[0] for r in records])
        order = np.argsort(-confs, kind="stable")
        aps = []
        for t in thresholds:
            matched: dict[int, np.ndarray] = {}
            tp_flags = np.zeros(len(records), dtype=bool)
            for rank, idx in enumerate(order):
                _, _, f_idx, costs = records[idx]
                if costs.size == 0:
                    continue
                used = matched.setdefault(f_idx, np.zeros(costs.size, dtype=bool))
                free = np.flatnonzero(~used)
                if free.size == 0:
                    continue
                best = free[int(np.argmin(costs[free]))]
                if costs[best] <= t:
                    used[best] = True
                    tp_flags[rank] = True
            ap = _ap_all_points(tp_flags, total_gt[cls])
            per_threshold[t][cls.value] = ap
            aps.append(ap)
        per_class[cls.value] = float(np.mean(aps))

    if excluded:
        warnings.warn(
            f"classes without ground truth excluded from mAP: {excluded}",
            stacklevel=2,
        )
    defined = [v for v in per_class.values() if v is not None]
    mean_ap = float(np.mean(defined)) if defined else 0.0
    return {
        "per_class": per_class,
        "per_threshold": {str(t): per_threshold[t] for t in thresholds},
        "mAP": mean_ap,
        "excluded_classes": excluded,
    }


# ---------------------------------------------------------------------------
# distance-aware ring metric


_BOUNDARY_EPS = 1e-9


def ring_indices(points: np.ndarray, spec: RingSpec) -> np.ndarray:
    """Ring index per point; -1 when at or beyond the outer coverage radius.

    Half-open membership: radius exactly k*w maps to ring k, so boundary
    points belong to the outer of the two adjacent rings. A 1e-9 tolerance
    keeps points whose radius sits a rounding error below a border from
    flipping to the inner ring.
    """
    radii = np.linalg.norm(points, axis=1)
    idx = np.floor((radii + _BOUNDARY_EPS) / spec.ring_width).astype(int)
    idx[idx >= spec.num_rings] = -1
    return idx


def split_into_rings(points: np.ndarray, spec: RingSpec) -> dict[int, list[np.ndarray]]:
    """Split a resampled point sequence into per-ring sub-elements.

    A sub-element is a maximal run of consecutive points sharing a ring, i.e.
    the polyline is cut wherever it crosses a ring border. Every covered
    point lands in exactly one ring's sub-elements.
    """
    if len(points) == 0:
        return {}
    idx = ring_indices(points, spec)
    out: dict[int, list[np.ndarray]] = {}
    boundaries = np.flatnonzero(np.diff(idx) != 0) + 1
    start = 0
    for stop in list(boundaries) + [len(points)]:
        k = int(idx[start])
        if k >= 0:
            out.setdefault(k, []).append(points[start:stop])
        start = stop
    return out


def ring_evaluate(
    gts,
    others,
    spec: RingSpec = RingSpec(),
    max_spacing: float = DEFAULT_MAX_SPACING,
) -> RingReport:
    """Distance-aware chamfer evaluation of one frame.

    Elements are matched one-to-one per class by chamfer distance; for each
    matched pair and each ring:

    * pairs where either side has no point in the ring are discarded;
    * pairs lying entirely inside the ring contribute their chamfer distance;
    * pairs straddling ring borders are split into per-ring sub-elements,
      sub-elements are re-assigned within the pair by minimum chamfer with
      the ring's outer radius as an upper bound, and each assigned sub-pair
      contributes its chamfer distance. Unassigned sub-elements are dropped
      (multiple/missing detections are the AP metric's concern).
    """
    report = RingReport(spec)
    cache = _ResampleCache(max_spacing)
    matching = match_elements(gts, others, max_spacing=max_spacing, cache=cache)

    for gi, oi, _cost in matching.pairs:
        pa = cache.points(gts[gi])
        pb = cache.points(others[oi])

        if pa.shape == pb.shape and np.array_equal(pa, pb):
            # identical pair: every sub-pair matches itself at distance zero
            for k, pieces in split_into_rings(pa, spec).items():
                report.entries[k].extend([0.0] * len(pieces))
            continue

        ia = ring_indices(pa, spec)
        ib = ring_indices(pb, spec)
        rings_a = set(int(k) for k in np.unique(ia))
        rings_b = set(int(k) for k in np.unique(ib))

        if rings_a == rings_b and len(rings_a) == 1:
            k = next(iter(rings_a))
            if k >= 0:
                # both elements entirely inside one ring
                report.entries[k].append(_chamfer_points(pa, pb))
            continue

        runs_a = split_into_rings(pa, spec)
        runs_b = split_into_rings(pb, spec)
        for k in sorted(set(runs_a) & set(runs_b)):
            pieces_a = runs_a[k]
            pieces_b = runs_b[k]
            cost = np.empty((len(pieces_a), len(pieces_b)))
            for r, qa in enumerate(pieces_a):
                for c, qb in enumerate(pieces_b):
                    cost[r, c] = _chamfer_points(qa, qb)
            for _r, _c, value in _assign(cost, spec.outer_radius(k)):
                report.entries[k].append(value)
    return report


def ring_evaluate_frames(frame_pairs, spec: RingSpec = RingSpec()) -> RingReport:
    """Evaluate (gts, others) pairs frame by frame and merge the reports."""
    report = RingReport(spec)
    for gts, others in frame_pairs:
        report = report.merge(ring_evaluate(gts, others, spec))
    return report
