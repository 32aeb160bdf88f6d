"""Lane detection metrics.

Mask-IoU F1: lanes are rasterized to fixed-width stripe masks and matched
one-to-one.  The matching maximizes, lexicographically, the number of
pairs whose IoU clears the threshold and then the total IoU of those
pairs; it is solved with a linear assignment on a weight matrix where
every clearing pair gets a constant bonus larger than any achievable IoU
sum.  Matched clearing pairs are true positives; remaining predictions
are false positives and remaining ground truths false negatives.

Point accuracy: predictions and ground truths are sampled at shared row
positions; a point is correct when the prediction is within pixel_threshold
of the ground truth.  Every ground-truth lane picks the prediction with
the most correct points.  Accuracy is total correct over total ground
truth points; a prediction is a false positive when no ground truth
matches it at match_ratio or better, and a ground truth whose best match
ratio falls below match_ratio is a false negative.

All ratios define 0/0 as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import default_line_width, lane_x_at, rasterize_lane_mask

IOU_THRESHOLD = 0.5
PIXEL_THRESHOLD = 20.0
MATCH_RATIO = 0.85


@dataclass
class EvalReport:
    metric: str
    values: dict = field(default_factory=dict)

    def as_text(self) -> str:
        width = max(len(k) for k in self.values) if self.values else 1
        lines = [f"metric: {self.metric}", "-" * (width + 14)]
        for key, value in self.values.items():
            if isinstance(value, float):
                lines.append(f"{key:<{width}}  {value:.6f}")
            else:
                lines.append(f"{key:<{width}}  {value}")
        return "\n".join(lines) + "\n"

    def as_kv(self) -> str:
        lines = [f"metric={self.metric}"]
        for key, value in self.values.items():
            lines.append(f"{key}={value!r}" if isinstance(value, float)
                         else f"{key}={value}")
        return "\n".join(lines) + "\n"


def lane_iou(lane_a, lane_b, height: int, width: int,
             line_width_px: int | None = None) -> float:
    """IoU of the two lanes' rasterized stripe masks; empty vs empty is 0."""
    if line_width_px is None:
        line_width_px = default_line_width(width)
    a = rasterize_lane_mask(lane_a, height, width, line_width_px)
    b = rasterize_lane_mask(lane_b, height, width, line_width_px)
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return float(inter) / float(union) if union else 0.0


def iou_matrix(pred_lanes, gt_lanes, height, width, line_width_px=None) -> np.ndarray:
    if line_width_px is None:
        line_width_px = default_line_width(width)
    masks_p = [rasterize_lane_mask(l, height, width, line_width_px) for l in pred_lanes]
    masks_g = [rasterize_lane_mask(l, height, width, line_width_px) for l in gt_lanes]
    out = np.zeros((len(masks_p), len(masks_g)))
    for i, a in enumerate(masks_p):
        for j, b in enumerate(masks_g):
            union = np.logical_or(a, b).sum()
            out[i, j] = np.logical_and(a, b).sum() / union if union else 0.0
    return out


def match_lanes(ious: np.ndarray, iou_threshold: float = IOU_THRESHOLD):
    """One-to-one matching maximizing (clearing pair count, total clearing IoU).

    Returns the list of matched (pred, gt) index pairs with
    iou >= iou_threshold.
    """
    if ious.size == 0:
        return []
    eligible = ious >= iou_threshold
    bonus = float(min(ious.shape)) + 1.0
    weights = np.where(eligible, ious + bonus, 0.0)
    rows, cols = linear_sum_assignment(-weights)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if eligible[i, j]]


def culane_f1(pred_lanes_per_image, gt_lanes_per_image, height: int, width: int,
              iou_threshold: float = IOU_THRESHOLD,
              line_width_px: int | None = None) -> EvalReport:
    """Dataset-level F1 from per-image one-to-one mask matching."""
    if len(pred_lanes_per_image) != len(gt_lanes_per_image):
        raise ValueError(
            f"{len(pred_lanes_per_image)} predictions for "
            f"{len(gt_lanes_per_image)} ground-truth images"
        )
    tp = fp = fn = 0
    for preds, gts in zip(pred_lanes_per_image, gt_lanes_per_image):
        ious = iou_matrix(preds, gts, height, width, line_width_px)
        matches = match_lanes(ious, iou_threshold)
        tp += len(matches)
        fp += len(preds) - len(matches)
        fn += len(gts) - len(matches)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport("culane_f1", {
        "f1": f1, "precision": precision, "recall": recall,
        "tp": tp, "fp": fp, "fn": fn,
        "iou_threshold": iou_threshold,
    })


def _lane_points_at(lane, h_samples) -> np.ndarray:
    """x at each sampled row, nan where the lane is absent."""
    return np.array(
        [np.nan if (x := lane_x_at(lane, float(h))) is None else x
         for h in h_samples],
        dtype=np.float64,
    )


def tusimple_accuracy(pred_lanes_per_image, gt_lanes_per_image, h_samples,
                      pixel_threshold: float = PIXEL_THRESHOLD,
                      match_ratio: float = MATCH_RATIO) -> EvalReport:
    """Point-level accuracy with per-image FP and FN rates."""
    if len(pred_lanes_per_image) != len(gt_lanes_per_image):
        raise ValueError(
            f"{len(pred_lanes_per_image)} predictions for "
            f"{len(gt_lanes_per_image)} ground-truth images"
        )
    correct_total = 0
    gt_points_total = 0
    fp_count = 0
    fn_count = 0
    pred_count = 0
    gt_count = 0
    for preds, gts in zip(pred_lanes_per_image, gt_lanes_per_image):
        pred_xs = [_lane_points_at(p, h_samples) for p in preds]
        gt_xs = [_lane_points_at(g, h_samples) for g in gts]
        pred_count += len(preds)
        gt_count += len(gts)
        matched_preds = set()
        for gx in gt_xs:
            present = ~np.isnan(gx)
            total = int(present.sum())
            gt_points_total += total
            best_correct = 0
            best_ratio = 0.0
            for pi, px in enumerate(pred_xs):
                both = present & ~np.isnan(px)
                correct = int((np.abs(px[both] - gx[both]) <= pixel_threshold).sum())
                ratio = correct / total if total else 0.0
                if ratio >= match_ratio:
                    matched_preds.add(pi)
                if correct > best_correct:
                    best_correct = correct
                best_ratio = max(best_ratio, ratio)
            correct_total += best_correct
            if best_ratio < match_ratio:
                fn_count += 1
        fp_count += len(preds) - len(matched_preds)
    accuracy = correct_total / gt_points_total if gt_points_total else 0.0
    fp_rate = fp_count / pred_count if pred_count else 0.0
    fn_rate = fn_count / gt_count if gt_count else 0.0
    return EvalReport("tusimple_accuracy", {
        "accuracy": accuracy, "fp": fp_rate, "fn": fn_rate,
        "pred_lanes": pred_count, "gt_lanes": gt_count,
        "pixel_threshold": pixel_threshold, "match_ratio": match_ratio,
    })


def write_report(report: EvalReport, out_dir) -> None:
    import os
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as f:
        f.write(report.as_text())
    with open(os.path.join(out_dir, "report.kv"), "w", encoding="utf-8") as f:
        f.write(report.as_kv())
