"""Tracking evaluation: identity-aware CLEAR metrics and identity-free set
distances between truth and tracker output.

Frame inputs are dictionaries mapping frame index to a list of
``(identity, box)`` pairs where box is the usual (x, y, w, h) array. The
set metrics operate on box centers by default (2-D Euclidean ground
distance); an IoU ground distance is available behind a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist

__all__ = [
    "ClearReport",
    "SetReport",
    "CountErrorHistogram",
    "iou",
    "iou_matrix",
    "max_weight_matching",
    "clear_mot",
    "ospa",
    "omat",
    "hausdorff",
    "count_error_histogram",
    "evaluate_set_metrics",
    "boxes_to_centers",
]


def iou(box_a, box_b) -> float:
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou(a, b)
    return out


def max_weight_matching(weights: np.ndarray, threshold: float = 0.0) -> list:
    """Maximize total weight over a bipartite matching.

    Pairs with weight below ``threshold`` are never matched; they are
    zeroed before the assignment so they compete exactly like leaving the
    pair unmatched. Returns (row, col) index pairs. Uses the Kuhn-Munkres
    assignment.
    """
    if weights.size == 0:
        return []
    eligible = np.where(weights >= threshold, weights, 0.0)
    rows, cols = linear_sum_assignment(-eligible)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if eligible[r, c] > 0.0]


@dataclass
class ClearReport:
    mota: float
    motp: float
    precision: float
    recall: float
    fp: int
    fn: int
    id_switches: int
    gt_count: int
    matches: int
    per_frame_matches: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mota": self.mota,
            "motp": self.motp,
            "precision": self.precision,
            "recall": self.recall,
            "fp": self.fp,
            "fn": self.fn,
            "id_switches": self.id_switches,
            "gt_count": self.gt_count,
            "matches": self.matches,
        }


def clear_mot(truth: dict, hypotheses: dict, iou_threshold: float = 0.5) -> ClearReport:
    """CLEAR evaluation with persistent matching.

    Per frame, matches from the previous frames are kept while their
    overlap stays above the threshold; the remaining pairs are matched by
    maximizing total IoU. An identity switch is counted whenever a truth
    identity is matched to a different hypothesis identity than its last
    recorded match.
    """
    frames = sorted(set(truth) | set(hypotheses))
    last_match: dict = {}
    fp = fn = switches = matches = 0
    gt_total = 0
    iou_sum = 0.0
    per_frame = {}
    for f in frames:
        gts = truth.get(f, [])
        hyps = hypotheses.get(f, [])
        gt_total += len(gts)
        overlap = iou_matrix([b for _, b in gts], [b for _, b in hyps])
        hyp_index = {hid: j for j, (hid, _) in enumerate(hyps)}
        used_gt = set()
        used_hyp = set()
        frame_pairs = []
        # Keep persisting matches first.
        for i, (gid, _) in enumerate(gts):
            j = hyp_index.get(last_match.get(gid))
            if j is not None and j not in used_hyp and overlap[i, j] >= iou_threshold:
                used_gt.add(i)
                used_hyp.add(j)
                frame_pairs.append((i, j))
        # Optimal assignment for the rest.
        free_gt = [i for i in range(len(gts)) if i not in used_gt]
        free_hyp = [j for j in range(len(hyps)) if j not in used_hyp]
        if free_gt and free_hyp:
            sub = overlap[np.ix_(free_gt, free_hyp)]
            for r, c in max_weight_matching(sub, threshold=iou_threshold):
                frame_pairs.append((free_gt[r], free_hyp[c]))
        matched_ids = []
        for i, j in frame_pairs:
            gid = gts[i][0]
            hid = hyps[j][0]
            if gid in last_match and last_match[gid] != hid:
                switches += 1
            last_match[gid] = hid
            iou_sum += overlap[i, j]
            matched_ids.append((gid, hid))
        matches += len(frame_pairs)
        fp += len(hyps) - len(frame_pairs)
        fn += len(gts) - len(frame_pairs)
        per_frame[f] = matched_ids
    mota = 100.0 * (1.0 - (fp + fn + switches) / gt_total) if gt_total else 100.0
    motp = 100.0 * iou_sum / matches if matches else 100.0
    precision = 100.0 * matches / (matches + fp) if matches + fp else 100.0
    recall = 100.0 * matches / (matches + fn) if matches + fn else 100.0
    return ClearReport(mota, motp, precision, recall, fp, fn, switches, gt_total, matches, per_frame)


def ospa(set_a, set_b, cutoff: float = 100.0, order: float = 1.0) -> float:
    """Optimal sub-pattern assignment distance between two point sets."""
    if cutoff <= 0 or order < 1:
        raise ValueError("cutoff must be positive and order >= 1")
    a = np.atleast_2d(np.asarray(set_a, dtype=float)) if len(set_a) else np.zeros((0, 1))
    b = np.atleast_2d(np.asarray(set_b, dtype=float)) if len(set_b) else np.zeros((0, 1))
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return cutoff
    if len(a) > len(b):
        a, b = b, a
    m, n = len(a), len(b)
    costs = np.minimum(cdist(a, b), cutoff) ** order
    rows, cols = linear_sum_assignment(costs)
    total = float(costs[rows, cols].sum()) + cutoff**order * (n - m)
    return (total / n) ** (1.0 / order)


def omat(set_a, set_b, order: float = 1.0) -> float:
    """Optimal mass transfer distance with uniform masses 1/|A| and 1/|B|.

    Solved as a small transport linear program; undefined for empty sets.
    """
    a = np.atleast_2d(np.asarray(set_a, dtype=float))
    b = np.atleast_2d(np.asarray(set_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("OMAT is undefined for empty sets")
    m, n = len(a), len(b)
    costs = cdist(a, b) ** order
    a_eq = np.zeros((m + n, m * n))
    b_eq = np.concatenate([np.full(m, 1.0 / m), np.full(n, 1.0 / n)])
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    result = linprog(costs.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not result.success:
        raise RuntimeError(f"transport LP failed: {result.message}")
    return float(result.fun) ** (1.0 / order)


def hausdorff(set_a, set_b) -> float:
    """Max of the two directed max-min distances; undefined for empty sets."""
    a = np.atleast_2d(np.asarray(set_a, dtype=float))
    b = np.atleast_2d(np.asarray(set_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff is undefined for empty sets")
    d = cdist(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


@dataclass
class SetReport:
    mean_ospa: float
    mean_omat: float
    mean_hausdorff: float
    per_frame_ospa: dict
    per_frame_omat: dict
    per_frame_hausdorff: dict
    frames_total: int
    frames_skipped: int

    def as_dict(self) -> dict:
        return {
            "mean_ospa": self.mean_ospa,
            "mean_omat": self.mean_omat,
            "mean_hausdorff": self.mean_hausdorff,
            "frames_total": self.frames_total,
            "frames_skipped": self.frames_skipped,
        }


def boxes_to_centers(entries) -> np.ndarray:
    if not entries:
        return np.zeros((0, 2))
    return np.stack([
        np.asarray(b, dtype=float)[:2] + 0.5 * np.asarray(b, dtype=float)[2:4]
        for _, b in entries
    ])


def evaluate_set_metrics(
    truth: dict,
    hypotheses: dict,
    cutoff: float = 100.0,
    ospa_order: float = 1.0,
    omat_order: float = 1.0,
    ground: str = "center",
) -> SetReport:
    """Per-frame set distances plus their averages.

    OSPA is defined on every frame (zero when both sets are empty). OMAT
    and Hausdorff are skipped when either set is empty; skipped frames are
    counted so coverage stays visible in the report.
    """
    if ground not in ("center", "iou"):
        raise ValueError("ground must be 'center' or 'iou'")
    frames = sorted(set(truth) | set(hypotheses))
    per_ospa, per_omat, per_hd = {}, {}, {}
    skipped = 0
    for f in frames:
        gts = truth.get(f, [])
        hyps = hypotheses.get(f, [])
        if ground == "center":
            a = boxes_to_centers(gts)
            b = boxes_to_centers(hyps)
            per_ospa[f] = ospa(a, b, cutoff, ospa_order)
            if len(a) and len(b):
                per_omat[f] = omat(a, b, omat_order)
                per_hd[f] = hausdorff(a, b)
            else:
                skipped += 1
        else:
            # IoU ground distance: d = 1 - IoU, applied pairwise.
            d = 1.0 - iou_matrix([b for _, b in gts], [b for _, b in hyps])
            per_ospa[f] = _ospa_from_costs(d, len(gts), len(hyps), cutoff, ospa_order)
            if len(gts) and len(hyps):
                per_hd[f] = float(max(d.min(axis=1).max(), d.min(axis=0).max()))
                per_omat[f] = _omat_from_costs(d, omat_order)
            else:
                skipped += 1
    mean = lambda d: float(np.mean(list(d.values()))) if d else math.nan
    return SetReport(
        mean(per_ospa), mean(per_omat), mean(per_hd),
        per_ospa, per_omat, per_hd, len(frames), skipped,
    )


def _ospa_from_costs(d: np.ndarray, m: int, n: int, cutoff: float, order: float) -> float:
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return cutoff
    if m > n:
        d = d.T
        m, n = n, m
    costs = np.minimum(d, cutoff) ** order
    rows, cols = linear_sum_assignment(costs)
    total = float(costs[rows, cols].sum()) + cutoff**order * (n - m)
    return (total / n) ** (1.0 / order)


def _omat_from_costs(d: np.ndarray, order: float) -> float:
    m, n = d.shape
    costs = d**order
    a_eq = np.zeros((m + n, m * n))
    b_eq = np.concatenate([np.full(m, 1.0 / m), np.full(n, 1.0 / n)])
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    result = linprog(costs.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not result.success:
        raise RuntimeError(f"transport LP failed: {result.message}")
    return float(result.fun) ** (1.0 / order)


@dataclass
class CountErrorHistogram:
    counts: dict
    frames: int
    zero_fraction: float

    def as_dict(self) -> dict:
        return {
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "frames": self.frames,
            "zero_fraction": self.zero_fraction,
        }


def count_error_histogram(truth: dict, hypotheses: dict) -> CountErrorHistogram:
    """Histogram of per-frame absolute errors in the number of targets."""
    frames = sorted(set(truth) | set(hypotheses))
    counts: dict[int, int] = {}
    zero = 0
    for f in frames:
        err = abs(len(truth.get(f, [])) - len(hypotheses.get(f, [])))
        counts[err] = counts.get(err, 0) + 1
        if err == 0:
            zero += 1
    fraction = zero / len(frames) if frames else 1.0
    return CountErrorHistogram(counts, len(frames), fraction)
