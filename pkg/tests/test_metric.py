import itertools
import math

import numpy as np
import pytest

from mapnoise import (
    ConfigError,
    ElementClass,
    Polyline,
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
from mapnoise.geom import resample_max_spacing
from mapnoise.metric import ring_indices
from helpers import brute_chamfer, element, line_x, random_polyline, rotate_points

BD = ElementClass.BOUNDARY


class TestChamfer:
    def test_identical_polylines_zero(self):
        p = Polyline([(0, 0), (7, 3), (10, 1)])
        assert chamfer(p, p) == 0.0

    def test_parallel_segments_unit_distance(self):
        a = Polyline([(0.0, 0.0), (20.0, 0.0)])
        b = Polyline([(0.0, 1.0), (20.0, 1.0)])
        assert chamfer(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            a = random_polyline(rng)
            b = random_polyline(rng)
            assert chamfer(a, b) == pytest.approx(chamfer(b, a), abs=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = random_polyline(rng)
            b = random_polyline(rng)
            pa = resample_max_spacing(a, 1.0).points
            pb = resample_max_spacing(b, 1.0).points
            assert chamfer(a, b) == pytest.approx(brute_chamfer(pa, pb), abs=1e-9)

    def test_non_negative(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            assert chamfer(random_polyline(rng), random_polyline(rng)) >= 0.0


class TestMatchElements:
    def test_single_pair(self):
        g = [line_x("g", BD, 0.0, 0.0, 10.0)]
        o = [line_x("o", BD, 0.5, 0.0, 10.0)]
        m = match_elements(g, o)
        assert m.pairs == [(0, 0, pytest.approx(0.5))]
        assert m.unmatched_gt == [] and m.unmatched_other == []

    def test_crossed_assignment_matches_exhaustive_oracle(self):
        gts = [line_x("g0", BD, 0.0, 0.0, 10.0), line_x("g1", BD, 10.0, 0.0, 10.0)]
        others = [line_x("o0", BD, 10.1, 0.0, 10.0), line_x("o1", BD, 0.1, 0.0, 10.0)]
        m = match_elements(gts, others)
        got = {(g, o) for g, o, _ in m.pairs}
        assert got == {(0, 1), (1, 0)}

        # exhaustive 2-permutation oracle
        def cost(g, o):
            return chamfer(gts[g].geometry, others[o].geometry)

        best = min(
            itertools.permutations(range(2)),
            key=lambda perm: sum(cost(g, perm[g]) for g in range(2)),
        )
        assert got == {(g, best[g]) for g in range(2)}

    def test_no_predictions_leaves_all_unmatched(self):
        gts = [line_x("g", BD, 0.0, 0.0, 10.0)]
        m = match_elements(gts, [])
        assert m.pairs == [] and m.unmatched_gt == [0]

    def test_classes_never_cross(self):
        gts = [line_x("g", ElementClass.CENTERLINE, 0.0, 0.0, 10.0)]
        others = [line_x("o", BD, 0.0, 0.0, 10.0)]
        m = match_elements(gts, others)
        assert m.pairs == []
        assert m.unmatched_gt == [0] and m.unmatched_other == [0]

    def test_max_cost_rejects_far_pairs(self):
        gts = [line_x("g", BD, 0.0, 0.0, 10.0)]
        others = [line_x("o", BD, 9.0, 0.0, 10.0)]
        m = match_elements(gts, others, max_cost=5.0)
        assert m.pairs == []

    def test_optimal_not_worse_than_greedy(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            gts = [element(f"g{i}", BD, random_polyline(rng).points) for i in range(4)]
            others = [element(f"o{i}", BD, random_polyline(rng).points) for i in range(4)]
            m = match_elements(gts, others)

            cost = np.array(
                [[chamfer(g.geometry, o.geometry) for o in others] for g in gts]
            )
            greedy_total, used_g, used_o = 0.0, set(), set()
            for _k in range(4):
                best = min(
                    ((r, c) for r in range(4) for c in range(4)
                     if r not in used_g and c not in used_o),
                    key=lambda rc: cost[rc],
                )
                used_g.add(best[0])
                used_o.add(best[1])
                greedy_total += cost[best]
            assert m.total_cost() <= greedy_total + 1e-12


class TestAveragePrecision:
    def test_perfect_predictions(self):
        gts = [line_x("g", cls, float(i), 0.0, 10.0) for i, cls in enumerate(ElementClass)]
        preds = [Prediction(e, 1.0) for e in gts]
        result = average_precision([(gts, preds)])
        assert result["mAP"] == 1.0
        assert all(v == 1.0 for v in result["per_class"].values())

    def test_single_prediction_at_intermediate_distance(self):
        # chamfer 0.7: FP at 0.5, TP at 1.0 and 1.5 -> AP = (0 + 1 + 1)/3
        gt = line_x("g", BD, 0.0, 0.0, 20.0)
        pred = Prediction(line_x("p", BD, 0.7, 0.0, 20.0), 0.9)
        with pytest.warns(UserWarning):
            result = average_precision([([gt], [pred])])
        assert result["per_class"][BD.value] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert result["per_threshold"]["0.5"][BD.value] == 0.0
        assert result["per_threshold"]["1.0"][BD.value] == 1.0

    def test_no_predictions_scores_zero(self):
        gt = line_x("g", BD, 0.0, 0.0, 20.0)
        with pytest.warns(UserWarning):
            result = average_precision([([gt], [])])
        assert result["per_class"][BD.value] == 0.0

    def test_class_without_gt_excluded_with_warning(self):
        gts = [line_x("g", BD, 0.0, 0.0, 20.0)]
        stray = Prediction(line_x("p", ElementClass.CENTERLINE, 0.0, 0.0, 20.0), 0.8)
        with pytest.warns(UserWarning, match="excluded"):
            result = average_precision([(gts, [stray, Prediction(gts[0], 0.9)])])
        assert result["per_class"][ElementClass.CENTERLINE.value] is None
        assert ElementClass.CENTERLINE.value in result["excluded_classes"]
        assert result["mAP"] == result["per_class"][BD.value]

    def test_duplicate_predictions_penalized(self):
        gt = line_x("g", BD, 0.0, 0.0, 20.0)
        dup1 = Prediction(line_x("p1", BD, 0.1, 0.0, 20.0), 0.9)
        dup2 = Prediction(line_x("p2", BD, 0.2, 0.0, 20.0), 0.8)
        with pytest.warns(UserWarning):
            result = average_precision([([gt], [dup1, dup2])])
        # second prediction is an FP after the first consumes the only GT;
        # AP stays 1.0 because recall hits 1 before the FP, but precision drops after
        assert result["per_class"][BD.value] == pytest.approx(1.0)

    def test_confidence_ordering_matters(self):
        gt = line_x("g", BD, 0.0, 0.0, 20.0)
        far = Prediction(line_x("pf", BD, 0.3, 0.0, 20.0), 0.9)   # matches first
        near = Prediction(line_x("pn", BD, 0.05, 0.0, 20.0), 0.5)  # left unmatched -> FP
        with pytest.warns(UserWarning):
            result = average_precision([([gt], [far, near])], thresholds=(0.5,))
        assert result["per_class"][BD.value] == pytest.approx(1.0)

    def test_prediction_confidence_validated(self):
        with pytest.raises(ValueError):
            Prediction(line_x("p", BD, 0.0, 0.0, 10.0), 1.5)


class TestRingSplitting:
    SPEC = RingSpec(ring_width=5.0, num_rings=7)

    def test_partition_completeness_fuzz(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            pts = resample_max_spacing(random_polyline(rng, box=40.0), 1.0).points
            runs = split_into_rings(pts, self.SPEC)
            idx = ring_indices(pts, self.SPEC)
            for i, point in enumerate(pts):
                hits = [
                    k
                    for k, pieces in runs.items()
                    for piece in pieces
                    if np.any(np.all(piece == point, axis=1))
                ]
                if idx[i] < 0:
                    assert hits == []
                else:
                    assert hits == [int(idx[i])]

    def test_boundary_point_belongs_to_outer_ring(self):
        pts = np.array([(4.0, 0.0), (5.0, 0.0), (6.0, 0.0)])
        idx = ring_indices(pts, self.SPEC)
        assert list(idx) == [0, 1, 1]
        runs = split_into_rings(pts, self.SPEC)
        assert np.array_equal(runs[0][0], pts[:1])
        assert np.array_equal(runs[1][0], pts[1:])

    def test_points_beyond_coverage_excluded(self):
        pts = np.array([(34.0, 0.0), (35.0, 0.0), (36.0, 0.0)])
        runs = split_into_rings(pts, self.SPEC)
        assert list(runs) == [6]
        assert np.array_equal(runs[6][0], pts[:1])

    def test_reentry_creates_separate_runs(self):
        pts = np.array([(4.0, 0.0), (6.0, 0.0), (4.5, 0.0), (6.5, 0.0)])
        runs = split_into_rings(pts, self.SPEC)
        assert len(runs[0]) == 2 and len(runs[1]) == 2


class TestRingEvaluate:
    def test_identical_sets_all_zero(self):
        gts = [line_x("a", BD, 1.0, -20.0, 20.0), line_x("b", ElementClass.CENTERLINE, 0.0, -20.0, 20.0)]
        report = ring_evaluate(gts, gts, RingSpec(5.0, 7))
        for entries in report.entries:
            assert all(v == 0.0 for v in entries)
        assert sum(len(e) for e in report.entries) > 0

    def test_two_ring_example(self):
        # 20 m radial segments offset by 1 m, rings of width 10
        gt = [element("g", BD, [(0.0, 0.0), (20.0, 0.0)])]
        other = [element("o", BD, [(0.0, 1.0), (20.0, 1.0)])]
        report = ring_evaluate(gt, other, RingSpec(10.0, 2))
        assert report.entries[0] == [pytest.approx(1.0, abs=0.05)]
        assert report.entries[1] == [pytest.approx(1.0, abs=0.05)]

    def test_pair_fully_inside_one_ring_equals_plain_chamfer(self):
        a = element("a", BD, [(6.0, 0.0), (7.0, 1.0), (8.0, 0.5)])
        b = element("b", BD, [(6.0, 0.5), (7.0, 1.5), (8.0, 1.0)])
        report = ring_evaluate([a], [b], RingSpec(5.0, 7))
        assert sum(len(e) for e in report.entries) == 1
        assert report.entries[1] == [pytest.approx(chamfer(a.geometry, b.geometry), abs=1e-12)]

    def test_rotation_grows_linearly_with_radius(self):
        # radial line rotated about the ego: per-ring error tracks r * dtheta
        dtheta = 0.01
        base = np.column_stack([np.linspace(2.0, 30.0, 15), np.zeros(15)])
        gt = [element("g", BD, base)]
        other = [element("o", BD, rotate_points(base, dtheta))]
        spec = RingSpec(5.0, 6)
        report = ring_evaluate(gt, other, spec)
        for k, entries in enumerate(report.entries):
            if not entries:
                continue
            pts = resample_max_spacing(gt[0].geometry, 1.0).points
            radii = np.linalg.norm(pts, axis=1)
            in_ring = radii[(radii >= k * 5.0) & (radii < (k + 1) * 5.0)]
            expected = float(np.mean(in_ring)) * 2 * math.sin(dtheta / 2)
            assert entries[0] == pytest.approx(expected, rel=0.1)
        medians = [s.get("median") for s in report.stats() if s["count"]]
        assert all(a < b for a, b in zip(medians, medians[1:]))

    def test_pair_in_different_rings_discarded(self):
        a = element("a", BD, [(2.0, 0.0), (3.0, 0.0)])
        b = element("b", BD, [(8.0, 0.0), (9.0, 0.0)])
        report = ring_evaluate([a], [b], RingSpec(5.0, 7))
        assert sum(len(e) for e in report.entries) == 0

    def test_outer_radius_bound_rejects_far_sub_elements(self):
        # both elements straddle ring 1, but on opposite sides of the ego:
        # their ring-1 pieces are ~14 m apart, above the 10 m outer radius
        a = element("a", BD, [(-9.0, 0.0), (4.0, 0.0)])
        b = element("b", BD, [(-4.0, 0.5), (9.0, 0.5)])
        report = ring_evaluate([a], [b], RingSpec(5.0, 2))
        assert len(report.entries[0]) == 1  # central pieces still match
        assert report.entries[1] == []

    def test_unmatched_elements_ignored(self):
        gts = [line_x("a", BD, 0.0, -10.0, 10.0)]
        others = [
            line_x("b", BD, 0.2, -10.0, 10.0),
            line_x("extra", BD, 3.0, -10.0, 10.0),
        ]
        report = ring_evaluate(gts, others, RingSpec(5.0, 7))
        assert sum(len(e) for e in report.entries) > 0

    def test_merge_matches_sequential_evaluation(self):
        rng = np.random.default_rng(14)
        frames = []
        for _ in range(6):
            gts = [element("g", BD, random_polyline(rng, box=20.0).points)]
            others = [element("o", BD, random_polyline(rng, box=20.0).points)]
            frames.append((gts, others))
        spec = RingSpec(5.0, 7)
        full = ring_evaluate_frames(frames, spec)
        first = ring_evaluate_frames(frames[:3], spec)
        second = ring_evaluate_frames(frames[3:], spec)
        merged = first.merge(second)
        assert merged.entries == full.entries

    def test_ring_spec_validation(self):
        with pytest.raises(ConfigError):
            RingSpec(ring_width=0.0)
        with pytest.raises(ConfigError):
            RingSpec(num_rings=0)


class TestStats:
    def test_five_values(self):
        stats = aggregate_stats([1, 2, 3, 4, 5])
        assert stats == {
            "count": 5, "mean": 3.0, "median": 3.0, "q1": 2.0, "q3": 4.0,
            "min": 1.0, "max": 5.0,
        }

    def test_empty(self):
        assert aggregate_stats([]) == {"count": 0}

    def test_uniform_median(self):
        rng = np.random.default_rng(123)
        stats = aggregate_stats(rng.uniform(0, 1, 10_000))
        assert abs(stats["median"] - 0.5) < 0.02


class TestReportSerialization:
    def test_to_dict_shape(self):
        report = RingReport(RingSpec(5.0, 2), [[1.0, 2.0], []])
        d = report.to_dict(series="gt_distortion")
        assert d["series"] == "gt_distortion"
        assert d["rings"][0]["count"] == 2
        assert d["rings"][1] == {"ring_index": 1, "count": 0, "entries": []}

    def test_csv_output(self, tmp_path):
        report = RingReport(RingSpec(5.0, 2), [[1.0, 3.0], []])
        path = tmp_path / "rings.csv"
        write_ring_csv({"gt_distortion": report}, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "ring_index,series,count,mean,median,q1,q3,min,max"
        assert lines[1].startswith("0,gt_distortion,2,2.0,2.0,")
        assert lines[2] == "1,gt_distortion,0,,,,,,"
