import numpy as np
import pytest

from resalane.data import LaneLabel
from resalane.metrics import (
    EvalReport,
    culane_f1,
    iou_matrix,
    lane_iou,
    match_lanes,
    tusimple_accuracy,
    write_report,
)

from oracles import match_lanes_bruteforce


def vertical_lane(index, col, height=20):
    return LaneLabel(index, [(float(col), 0.0), (float(col), float(height - 1))])


# ---- lane IoU


def test_lane_iou_identical_and_disjoint():
    a = vertical_lane(0, 10)
    b = vertical_lane(1, 10)
    c = vertical_lane(2, 40)
    assert lane_iou(a, b, 20, 60, line_width_px=3) == 1.0
    assert lane_iou(a, c, 20, 60, line_width_px=3) == 0.0


def test_lane_iou_hand_overlap():
    # stripes {4,5,6} and {6,7,8}: one shared column of five -> 0.2
    a = vertical_lane(0, 5)
    b = vertical_lane(1, 7)
    assert abs(lane_iou(a, b, 20, 60, line_width_px=3) - 0.2) < 1e-12


def test_lane_iou_empty_lanes_are_zero():
    empty = LaneLabel(0, [(5.0, 3.0)])  # single point rasterizes to nothing
    assert lane_iou(empty, empty, 20, 60, line_width_px=3) == 0.0
    assert lane_iou(empty, vertical_lane(1, 5), 20, 60, line_width_px=3) == 0.0


def test_iou_matrix_shape():
    preds = [vertical_lane(0, 5), vertical_lane(1, 9)]
    gts = [vertical_lane(0, 5)]
    m = iou_matrix(preds, gts, 20, 60, line_width_px=3)
    assert m.shape == (2, 1)
    assert m[0, 0] == 1.0


# ---- matching vs brute force


def test_match_lanes_empty_inputs():
    assert match_lanes(np.zeros((0, 3))) == []
    assert match_lanes(np.zeros((2, 0))) == []


def test_match_lanes_prefers_count_over_total_iou():
    # one pred could take the single high-IoU pair, but two moderate pairs win
    ious = np.array([
        [0.95, 0.60],
        [0.90, 0.00],
    ])
    matches = match_lanes(ious, iou_threshold=0.5)
    assert sorted(matches) == [(0, 1), (1, 0)]


def test_match_lanes_breaks_count_ties_by_total_iou():
    ious = np.array([
        [0.9, 0.8],
        [0.8, 0.1],
    ])
    # both assignments give one or two clearing pairs; best is (0,1)+(1,0)? no:
    # (0,0)+(1,1): pairs 0.9 + 0.1 -> only 0.9 clears (count 1)
    # (0,1)+(1,0): 0.8 + 0.8 both clear (count 2)
    assert sorted(match_lanes(ious, iou_threshold=0.5)) == [(0, 1), (1, 0)]


def assert_matches_bruteforce(ious, threshold):
    got = match_lanes(ious, threshold)
    ref = match_lanes_bruteforce(ious, threshold)
    # the optimum is unique in objective value; pairs may differ only on ties
    got_total = sum(ious[p, g] for p, g in got)
    ref_total = sum(ious[p, g] for p, g in ref)
    assert len(got) == len(ref), (got, ref)
    assert abs(got_total - ref_total) < 1e-9, (got, ref)
    # validity: one-to-one and every returned pair clears the threshold
    assert len({p for p, _ in got}) == len(got)
    assert len({g for _, g in got}) == len(got)
    assert all(ious[p, g] >= threshold for p, g in got)


def test_match_lanes_agrees_with_bruteforce_randomized():
    rng = np.random.default_rng(123)
    for case in range(100):
        n_pred = int(rng.integers(0, 6))
        n_gt = int(rng.integers(0, 6))
        ious = rng.uniform(0.0, 1.0, size=(n_pred, n_gt))
        assert_matches_bruteforce(ious, 0.5)


# ---- dataset F1


def test_culane_f1_hand_case_half():
    preds = [[vertical_lane(0, 10), vertical_lane(1, 25)]]
    gts = [[vertical_lane(0, 10), vertical_lane(1, 40)]]
    report = culane_f1(preds, gts, 20, 60, line_width_px=3)
    v = report.values
    assert (v["tp"], v["fp"], v["fn"]) == (1, 1, 1)
    assert v["precision"] == 0.5
    assert v["recall"] == 0.5
    assert v["f1"] == 0.5


def test_culane_f1_perfect_and_empty():
    gts = [[vertical_lane(0, 10), vertical_lane(1, 40)]]
    perfect = culane_f1(gts, gts, 20, 60, line_width_px=3)
    assert perfect.values["f1"] == 1.0
    nothing = culane_f1([[]], gts, 20, 60, line_width_px=3)
    assert nothing.values["f1"] == 0.0
    assert nothing.values["fn"] == 2
    both_empty = culane_f1([[]], [[]], 20, 60, line_width_px=3)
    assert both_empty.values["f1"] == 0.0  # 0/0 ratios defined as 0


def test_culane_f1_swapping_roles_swaps_precision_recall():
    rng = np.random.default_rng(7)
    preds, gts = [], []
    for _ in range(5):
        preds.append([vertical_lane(i, int(rng.integers(2, 58)))
                      for i in range(int(rng.integers(0, 4)))])
        gts.append([vertical_lane(i, int(rng.integers(2, 58)))
                    for i in range(int(rng.integers(0, 4)))])
    fwd = culane_f1(preds, gts, 20, 60, line_width_px=3).values
    rev = culane_f1(gts, preds, 20, 60, line_width_px=3).values
    assert fwd["tp"] == rev["tp"]
    assert fwd["precision"] == rev["recall"]
    assert fwd["recall"] == rev["precision"]
    assert abs(fwd["f1"] - rev["f1"]) < 1e-12


def test_culane_f1_rejects_length_mismatch():
    with pytest.raises(ValueError):
        culane_f1([[]], [[], []], 20, 60)


# ---- point accuracy


H_SAMPLES = [4, 8, 12, 16]


def slanted_lane(index, x0, dx=0.0):
    pts = [(x0 + dx * i, float(h)) for i, h in enumerate(H_SAMPLES)]
    return LaneLabel(index, pts)


def test_tusimple_perfect():
    gts = [[slanted_lane(0, 10.0), slanted_lane(1, 40.0)]]
    report = tusimple_accuracy(gts, gts, H_SAMPLES)
    assert report.values["accuracy"] == 1.0
    assert report.values["fp"] == 0.0
    assert report.values["fn"] == 0.0
    assert report.values["gt_lanes"] == 2


def test_tusimple_threshold_is_inclusive():
    gts = [[slanted_lane(0, 10.0)]]
    preds = [[slanted_lane(0, 10.0 + 20.0)]]  # exactly at the pixel threshold
    report = tusimple_accuracy(preds, gts, H_SAMPLES, pixel_threshold=20.0)
    assert report.values["accuracy"] == 1.0
    just_out = [[slanted_lane(0, 10.0 + 20.000001)]]
    report = tusimple_accuracy(just_out, gts, H_SAMPLES, pixel_threshold=20.0)
    assert report.values["accuracy"] == 0.0
    assert report.values["fp"] == 1.0
    assert report.values["fn"] == 1.0


def test_tusimple_partial_match_counts_points():
    # prediction correct on 3 of 4 sampled rows: accuracy 0.75, below the
    # 0.85 match ratio so the lane still counts as both FP and FN
    gt = LaneLabel(0, [(10.0, 4.0), (10.0, 8.0), (10.0, 12.0), (10.0, 16.0)])
    pred = LaneLabel(0, [(10.0, 4.0), (10.0, 8.0), (10.0, 12.0), (90.0, 16.0)])
    report = tusimple_accuracy([[pred]], [[gt]], H_SAMPLES, pixel_threshold=5.0)
    assert report.values["accuracy"] == 0.75
    assert report.values["fp"] == 1.0
    assert report.values["fn"] == 1.0


def test_tusimple_no_predictions():
    gts = [[slanted_lane(0, 10.0)]]
    report = tusimple_accuracy([[]], gts, H_SAMPLES)
    assert report.values["accuracy"] == 0.0
    assert report.values["fp"] == 0.0  # no predictions -> 0/0 -> 0
    assert report.values["fn"] == 1.0


def test_tusimple_rejects_length_mismatch():
    with pytest.raises(ValueError):
        tusimple_accuracy([[]], [[], []], H_SAMPLES)


# ---- report formatting


def test_report_text_and_kv(tmp_path):
    report = EvalReport("culane_f1", {"f1": 0.5, "tp": 3})
    text = report.as_text()
    assert text.startswith("metric: culane_f1\n")
    assert "f1" in text and "0.500000" in text
    kv = report.as_kv()
    assert "metric=culane_f1" in kv
    assert "f1=0.5" in kv
    assert "tp=3" in kv

    write_report(report, tmp_path)
    assert (tmp_path / "report.txt").read_text() == text
    assert (tmp_path / "report.kv").read_text() == kv
