import math

import numpy as np
import pytest

from vemtrack.metrics import (
    clear_mot,
    count_error_histogram,
    evaluate_set_metrics,
    hausdorff,
    iou,
    iou_matrix,
    max_weight_matching,
    omat,
    ospa,
)

from oracles import brute_force_max_matching, brute_force_ospa


def frames_from(rows):
    """rows: list of (frame, id, box)"""
    out = {}
    for frame, ident, box in rows:
        out.setdefault(frame, []).append((ident, np.asarray(box, dtype=float)))
    return out


class TestIoU:
    def test_identical_boxes(self):
        assert iou([0, 0, 10, 10], [0, 0, 10, 10]) == 1.0

    def test_disjoint_boxes(self):
        assert iou([0, 0, 10, 10], [20, 20, 10, 10]) == 0.0

    def test_half_overlap(self):
        assert iou([0, 0, 10, 10], [5, 0, 10, 10]) == pytest.approx(50 / 150)


class TestClearMot:
    def test_perfect_tracking(self):
        truth = frames_from([(f, 1, [f, 0, 10, 10]) for f in range(5)])
        report = clear_mot(truth, truth)
        assert report.mota == 100.0
        assert report.motp == 100.0
        assert report.fp == report.fn == report.id_switches == 0

    def test_no_hypotheses(self):
        truth = frames_from([(f, 1, [0, 0, 10, 10]) for f in range(4)])
        report = clear_mot(truth, {})
        assert report.recall == 0.0
        assert report.fn == 4
        assert report.mota == 0.0

    def test_empty_everything(self):
        report = clear_mot({}, {})
        assert report.mota == 100.0
        assert report.motp == 100.0

    def test_single_swap_counts_two_switches(self):
        # Two parallel targets; hypothesis identities swap once mid-way.
        rows_t, rows_h = [], []
        for f in range(6):
            rows_t += [(f, 1, [0, 0, 10, 10]), (f, 2, [100, 0, 10, 10])]
            if f < 3:
                rows_h += [(f, 11, [0, 0, 10, 10]), (f, 12, [100, 0, 10, 10])]
            else:
                rows_h += [(f, 12, [0, 0, 10, 10]), (f, 11, [100, 0, 10, 10])]
        report = clear_mot(frames_from(rows_t), frames_from(rows_h))
        assert report.id_switches == 2
        assert report.fp == report.fn == 0

    def test_mota_weakly_decreases_with_injected_fp(self):
        truth = frames_from([(f, 1, [f, 0, 10, 10]) for f in range(10)])
        perfect = clear_mot(truth, truth).mota
        noisy_rows = [(f, 1, [f, 0, 10, 10]) for f in range(10)]
        noisy_rows += [(f, 99, [300, 300, 10, 10]) for f in range(5)]
        noisy = clear_mot(truth, frames_from(noisy_rows)).mota
        assert noisy < perfect

    def test_persistent_match_resists_a_closer_newcomer(self):
        # Frame 0 establishes gt1->h1; frame 1 h2 overlaps gt1 slightly
        # better but h1 still clears the threshold, so the match persists.
        truth = frames_from([(0, 1, [0, 0, 10, 10]), (1, 1, [0, 0, 10, 10])])
        hyps = frames_from(
            [
                (0, 1, [0, 0, 10, 10]),
                (1, 1, [1, 0, 10, 10]),
                (1, 2, [0, 0, 10, 10]),
            ]
        )
        report = clear_mot(truth, hyps)
        assert report.id_switches == 0
        assert report.per_frame_matches[1] == [(1, 1)]

    def test_assignment_matches_brute_force(self, rng):
        for _ in range(300):
            m = rng.integers(0, 6)
            n = rng.integers(0, 6)
            weights = rng.uniform(0, 1, size=(m, n))
            ours = max_weight_matching(weights, threshold=0.3)
            ours_total = math.fsum(weights[r, c] for r, c in ours)
            best_total, _ = brute_force_max_matching(weights, threshold=0.3)
            assert ours_total == pytest.approx(best_total, abs=1e-12)


class TestOspa:
    def test_identical_sets(self, rng):
        pts = rng.uniform(0, 100, size=(4, 2))
        assert ospa(pts, pts) == pytest.approx(0.0, abs=1e-12)

    def test_cardinality_only(self):
        assert ospa(np.array([[0.0, 0.0]]), np.zeros((0, 2)), cutoff=10.0) == 10.0
        assert ospa([], [], cutoff=10.0) == 0.0

    def test_one_dimensional_example(self):
        assert ospa(np.array([[0.0]]), np.array([[3.0]]), cutoff=10.0, order=1.0) == pytest.approx(3.0)

    def test_symmetry_and_cutoff_bound(self, rng):
        for _ in range(50):
            a = rng.uniform(0, 300, size=(rng.integers(0, 5), 2))
            b = rng.uniform(0, 300, size=(rng.integers(0, 5), 2))
            d_ab = ospa(a, b, cutoff=50.0)
            d_ba = ospa(b, a, cutoff=50.0)
            assert d_ab == pytest.approx(d_ba, abs=1e-9)
            assert d_ab <= 50.0 + 1e-12

    def test_singletons_reduce_to_clamped_distance(self, rng):
        for _ in range(20):
            a = rng.uniform(0, 300, size=(1, 2))
            b = rng.uniform(0, 300, size=(1, 2))
            expected = min(float(np.linalg.norm(a - b)), 60.0)
            assert ospa(a, b, cutoff=60.0) == pytest.approx(expected)

    def test_matches_brute_force(self, rng):
        for _ in range(300):
            a = rng.uniform(0, 200, size=(rng.integers(1, 6), 2))
            b = rng.uniform(0, 200, size=(rng.integers(1, 6), 2))
            ours = ospa(a, b, cutoff=75.0, order=1.0)
            brute = brute_force_ospa(a, b, cutoff=75.0, order=1.0)
            assert ours == pytest.approx(brute, abs=1e-9)


class TestOmatAndHausdorff:
    def test_identical_sets_are_zero(self, rng):
        pts = rng.uniform(0, 100, size=(3, 2))
        assert omat(pts, pts) == pytest.approx(0.0, abs=1e-9)
        assert hausdorff(pts, pts) == 0.0

    def test_singletons(self):
        a = np.array([[0.0]])
        b = np.array([[3.0]])
        assert omat(a, b) == pytest.approx(3.0)
        assert hausdorff(a, b) == pytest.approx(3.0)

    def test_hausdorff_directed_max(self):
        a = np.array([[0.0], [10.0]])
        b = np.array([[0.0]])
        assert hausdorff(a, b) == pytest.approx(10.0)

    def test_omat_equal_cardinality_matches_assignment(self, rng):
        # With equal uniform masses the transport plan degenerates to the
        # optimal assignment, so OMAT(p=1) equals mean assigned distance.
        from scipy.optimize import linear_sum_assignment
        from scipy.spatial.distance import cdist

        for _ in range(20):
            n = rng.integers(1, 5)
            a = rng.uniform(0, 100, size=(n, 2))
            b = rng.uniform(0, 100, size=(n, 2))
            d = cdist(a, b)
            rows, cols = linear_sum_assignment(d)
            expected = d[rows, cols].sum() / n
            assert omat(a, b, order=1.0) == pytest.approx(expected, abs=1e-7)

    def test_empty_sets_raise(self):
        with pytest.raises(ValueError):
            omat(np.zeros((0, 2)), np.array([[1.0, 1.0]]))
        with pytest.raises(ValueError):
            hausdorff(np.zeros((0, 2)), np.array([[1.0, 1.0]]))


class TestSetReport:
    def test_empty_frames_skipped_and_counted(self):
        truth = frames_from([(0, 1, [0, 0, 10, 10]), (1, 1, [0, 0, 10, 10])])
        hyps = frames_from([(0, 7, [0, 0, 10, 10])])
        report = evaluate_set_metrics(truth, hyps, cutoff=50.0)
        assert report.frames_total == 2
        assert report.frames_skipped == 1
        assert report.per_frame_ospa[1] == 50.0
        assert 1 not in report.per_frame_hausdorff

    def test_iou_ground_distance_flag(self):
        truth = frames_from([(0, 1, [0, 0, 10, 10])])
        hyps = frames_from([(0, 7, [0, 0, 10, 10])])
        report = evaluate_set_metrics(truth, hyps, cutoff=1.0, ground="iou")
        assert report.mean_ospa == pytest.approx(0.0, abs=1e-12)


class TestCountErrors:
    def test_perfect_counts(self):
        truth = frames_from([(f, 1, [0, 0, 5, 5]) for f in range(10)])
        hist = count_error_histogram(truth, truth)
        assert hist.zero_fraction == 1.0
        assert hist.counts == {0: 10}

    def test_constant_excess(self):
        truth = frames_from([(f, 1, [0, 0, 5, 5]) for f in range(10)])
        hyp_rows = [(f, 1, [0, 0, 5, 5]) for f in range(10)]
        hyp_rows += [(f, 2, [50, 50, 5, 5]) for f in range(10)]
        hist = count_error_histogram(truth, frames_from(hyp_rows))
        assert hist.counts == {1: 10}
        assert hist.zero_fraction == 0.0

    def test_bins_partition_frames(self, rng):
        truth_rows, hyp_rows = [], []
        for f in range(30):
            for i in range(rng.integers(0, 4)):
                truth_rows.append((f, i, [0, 0, 5, 5]))
            for i in range(rng.integers(0, 4)):
                hyp_rows.append((f, 100 + i, [0, 0, 5, 5]))
        truth = frames_from(truth_rows)
        hyps = frames_from(hyp_rows)
        hist = count_error_histogram(truth, hyps)
        assert sum(hist.counts.values()) == hist.frames
