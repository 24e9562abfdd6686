import numpy as np
import pytest

from refimpl import ap_case_grid, reference_ap
from rectflip.geometry import Box
from rectflip.metrics import IOU_GRID, EvalReport, average_precision, evaluate
from rectflip.objective import Detection, GroundTruthObject

GT = GroundTruthObject(box=Box(0.0, 0.0, 10.0, 10.0), label=0)


def det(box, score, label=0):
    return Detection(box=box, label=label, score=score)


def test_single_true_positive_is_perfect():
    preds = [det(Box(0.0, 0.0, 10.0, 8.0), 0.9)]  # IoU 0.8
    assert average_precision([preds], [[GT]], 0, 0.5) == 1.0


def test_rank_of_false_positive_decides_ap():
    tp = det(GT.box, 0.9)
    fp = det(Box(50.0, 50.0, 60.0, 60.0), 0.8)
    assert average_precision([[tp, fp]], [[GT]], 0, 0.5) == 1.0
    fp_first = [det(Box(50.0, 50.0, 60.0, 60.0), 0.95), det(GT.box, 0.9)]
    assert average_precision([fp_first], [[GT]], 0, 0.5) == 0.5


def test_class_without_ground_truth_is_undefined():
    preds = [det(GT.box, 0.9, label=1)]
    assert average_precision([preds], [[GT]], 1, 0.5) is None


def test_no_predictions_scores_zero():
    assert average_precision([[]], [[GT]], 0, 0.5) == 0.0


def test_duplicate_hits_count_once():
    preds = [det(GT.box, 0.9), det(GT.box, 0.8)]
    ref = reference_ap([preds], [[GT]], 0, 0.5)
    assert average_precision([preds], [[GT]], 0, 0.5) == pytest.approx(
        float(ref), abs=1e-12
    )
    assert float(ref) == 1.0  # the duplicate lands after full recall


def test_matching_prefers_higher_iou():
    near = GroundTruthObject(box=Box(0.0, 0.0, 10.0, 10.0), label=0)
    far = GroundTruthObject(box=Box(6.0, 0.0, 16.0, 10.0), label=0)
    # The first prediction overlaps both truths past the threshold and must
    # take `near` (IoU 0.82 beats 0.33). The second then still finds `far`
    # free, so both truths end up matched. A greedy that grabbed `far` first
    # would strand the second prediction below the threshold against `near`.
    first = det(Box(1.0, 0.0, 11.0, 10.0), 0.9)
    second = det(far.box, 0.8)
    ap = average_precision([[first, second]], [[near, far]], 0, 0.3)
    assert ap == pytest.approx(1.0, abs=1e-12)


def test_ap_exhaustive_against_rational_oracle():
    checked = 0
    for dets_pi, gts_pi in ap_case_grid(max_preds=3, max_gts=3):
        ref = reference_ap(dets_pi, gts_pi, 0, 0.5)
        prod = average_precision(dets_pi, gts_pi, 0, 0.5)
        assert prod == pytest.approx(float(ref), abs=1e-12)
        checked += 1
    assert checked == 664  # sum over 1..3 GTs of all target/rank assignments


def test_ap_only_depends_on_score_ranking(rng):
    gts = [
        [GT, GroundTruthObject(box=Box(20.0, 0.0, 30.0, 10.0), label=0)]
    ]
    preds = [
        det(GT.box, 0.9),
        det(Box(20.0, 0.0, 30.0, 10.0), 0.6),
        det(Box(50.0, 50.0, 55.0, 55.0), 0.3),
    ]
    base = average_precision([preds], gts, 0, 0.5)
    squashed = [
        Detection(box=p.box, label=p.label, score=p.score ** 3) for p in preds
    ]
    assert average_precision([squashed], gts, 0, 0.5) == base


def test_evaluate_perfect_toy_scene():
    dets = [[det(GT.box, 1.0)]]
    gts = [[GT]]
    report = evaluate(dets, gts, num_classes=3)
    assert report.mAP50 == 1.0
    assert report.mAP75 == 1.0
    assert report.mAP == 1.0
    assert report.AQ is None


def test_evaluate_no_detections_is_zero():
    report = evaluate([[]], [[GT]], num_classes=3)
    assert report.mAP == 0.0
    assert report.mAP50 == 0.0
    assert report.mAP75 == 0.0


def test_evaluate_mean_queries():
    report = evaluate(
        [[], [], []],
        [[GT], [GT], [GT]],
        num_classes=1,
        queries=[100, 200, 300],
    )
    assert report.AQ == 200.0


def test_evaluate_rejects_empty_or_mismatched_input():
    with pytest.raises(ValueError):
        evaluate([], [], num_classes=1)
    with pytest.raises(ValueError):
        evaluate([[]], [[GT], [GT]], num_classes=1)


def test_iou_grid_values_are_exact():
    assert IOU_GRID == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def test_map50_bounds_map(rng):
    # Randomized scenes: mAP over the threshold grid never beats mAP50.
    for _ in range(25):
        gts, dets = [], []
        for _ in range(3):
            img_gts, img_dets = [], []
            for _ in range(int(rng.integers(1, 4))):
                x1, y1 = (float(v) for v in rng.integers(0, 30, 2))
                side = float(rng.integers(5, 15))
                img_gts.append(
                    GroundTruthObject(box=Box(x1, y1, x1 + side, y1 + side), label=0)
                )
                jitter = float(rng.integers(0, 6))
                img_dets.append(
                    det(
                        Box(x1 + jitter, y1, x1 + side + jitter, y1 + side),
                        float(rng.uniform(0.2, 1.0)),
                    )
                )
            gts.append(img_gts)
            dets.append(img_dets)
        report = evaluate(dets, gts, num_classes=1)
        assert report.mAP50 >= report.mAP - 1e-12


def size_scene():
    small = GroundTruthObject(box=Box(0.0, 0.0, 16.0, 16.0), label=0)
    medium = GroundTruthObject(box=Box(30.0, 0.0, 78.0, 48.0), label=0)
    large = GroundTruthObject(box=Box(0.0, 60.0, 128.0, 188.0), label=0)
    return small, medium, large


def test_size_splits_score_their_own_ground_truths():
    small, medium, large = size_scene()
    dets = [[det(small.box, 0.9), det(medium.box, 0.8), det(large.box, 0.7)]]
    report = evaluate(dets, [[small, medium, large]], num_classes=1)
    assert report.mAP_S == 1.0
    assert report.mAP_M == 1.0
    assert report.mAP_L == 1.0


def test_size_split_ignores_matches_outside_the_band():
    small, medium, large = size_scene()
    # Only the medium object is detected: S and L lose their truths entirely
    # (AP 0 with no matching preds), M stays perfect. The medium match is
    # dropped from the S/L curves rather than counted as a false positive.
    dets = [[det(medium.box, 0.8)]]
    report = evaluate(dets, [[small, medium, large]], num_classes=1)
    assert report.mAP_M == 1.0
    assert report.mAP_S == 0.0
    assert report.mAP_L == 0.0


def test_size_split_undefined_without_ground_truth_in_band():
    small, _, _ = size_scene()
    report = evaluate([[det(small.box, 0.9)]], [[small]], num_classes=1)
    assert report.mAP_S == 1.0
    assert report.mAP_M is None
    assert report.mAP_L is None


def test_report_serialization_round_trip():
    report = EvalReport(
        mAP=0.5, mAP50=1.0, mAP75=0.25, mAP_S=None, mAP_M=None, mAP_L=None, AQ=3.0
    )
    data = report.to_dict()
    assert set(data) == {"mAP", "mAP50", "mAP75", "mAP_S", "mAP_M", "mAP_L", "AQ"}
    assert "mAP50" in report.to_json()
