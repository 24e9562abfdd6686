"""Detection-quality metrics over a dataset: AP, mAP variants, mean queries.

Average precision uses the all-points interpolation (precision envelope),
matching is greedy per class in descending score order, and a class with no
ground truth anywhere is excluded from the mean rather than scored zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import area, iou
from .objective import Detection, GroundTruthObject

IOU_GRID = tuple(i / 100.0 for i in range(50, 100, 5))

SMALL_AREA = 32.0**2
LARGE_AREA = 96.0**2


@dataclass(frozen=True)
class EvalReport:
    """COCO-flavoured summary: mAP columns plus mean queries per image."""

    mAP: Optional[float]
    mAP50: Optional[float]
    mAP75: Optional[float]
    mAP_S: Optional[float]
    mAP_M: Optional[float]
    mAP_L: Optional[float]
    AQ: Optional[float]

    def to_dict(self) -> dict:
        return {
            "mAP": self.mAP,
            "mAP50": self.mAP50,
            "mAP75": self.mAP75,
            "mAP_S": self.mAP_S,
            "mAP_M": self.mAP_M,
            "mAP_L": self.mAP_L,
            "AQ": self.AQ,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _match_class(
    dets_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruthObject]],
    label: int,
    iou_thresh: float,
) -> tuple[list[tuple[float, Optional[GroundTruthObject]]], int]:
    """Greedy matching for one class across the dataset.

    Returns ([(score, matched GT or None)] in descending score order,
    total class GTs). Each prediction takes the unmatched same-image GT
    with the highest IoU at or above the threshold.
    """
    preds: list[tuple[float, int, Detection]] = []
    for img_idx, dets in enumerate(dets_per_image):
        for d in dets:
            if d.label == label:
                preds.append((d.score, img_idx, d))
    preds.sort(key=lambda t: -t[0])

    gt_lists = [
        [g for g in gts if g.label == label] for gts in gts_per_image
    ]
    n_gt = sum(len(lst) for lst in gt_lists)
    taken = [[False] * len(lst) for lst in gt_lists]

    outcomes: list[tuple[float, Optional[GroundTruthObject]]] = []
    for score, img_idx, det in preds:
        best_iou = 0.0
        best_j = -1
        for j, g in enumerate(gt_lists[img_idx]):
            if taken[img_idx][j]:
                continue
            v = iou(det.box, g.box)
            if v >= iou_thresh and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            taken[img_idx][best_j] = True
            outcomes.append((score, gt_lists[img_idx][best_j]))
        else:
            outcomes.append((score, None))
    return outcomes, n_gt


def _ap_from_outcomes(
    outcomes: Sequence[tuple[float, Optional[GroundTruthObject]]], n_gt: int
) -> Optional[float]:
    """All-points interpolated AP from match outcomes sorted by score."""
    if n_gt == 0:
        return None
    if not outcomes:
        return 0.0
    tp = 0
    fp = 0
    recalls = []
    precisions = []
    for _, matched in outcomes:
        if matched is not None:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / n_gt)
        precisions.append(tp / (tp + fp))
    # Precision envelope: best precision achievable at recall >= r.
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = recalls[0] * precisions[0]
    for i in range(1, len(recalls)):
        ap += (recalls[i] - recalls[i - 1]) * precisions[i]
    return ap


def average_precision(
    dets_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruthObject]],
    label: int,
    iou_thresh: float,
) -> Optional[float]:
    """AP for one class at one IoU threshold; None when the class has no GT."""
    outcomes, n_gt = _match_class(
        dets_per_image, gts_per_image, label, iou_thresh
    )
    return _ap_from_outcomes(outcomes, n_gt)


def _is_small(g: GroundTruthObject) -> bool:
    return area(g.box) < SMALL_AREA


def _is_medium(g: GroundTruthObject) -> bool:
    return SMALL_AREA <= area(g.box) <= LARGE_AREA


def _is_large(g: GroundTruthObject) -> bool:
    return area(g.box) > LARGE_AREA


def _ap_size_split(
    dets_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruthObject]],
    label: int,
    iou_thresh: float,
    keep,
) -> Optional[float]:
    """AP over the GTs selected by the `keep` predicate.

    Matching runs against the full GT set first; predictions matched to an
    out-of-range GT are dropped, unmatched predictions stay as FPs.
    """
    outcomes, _ = _match_class(dets_per_image, gts_per_image, label, iou_thresh)
    filtered = [
        (score, g) for score, g in outcomes if g is None or keep(g)
    ]
    n_gt = sum(
        1
        for gts in gts_per_image
        for g in gts
        if g.label == label and keep(g)
    )
    if n_gt == 0:
        return None
    return _ap_from_outcomes(filtered, n_gt)


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def evaluate(
    dets_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruthObject]],
    num_classes: int,
    queries: Optional[Sequence[int]] = None,
) -> EvalReport:
    """Dataset-level report across classes, IoU grid, and size splits.

    `queries` (one count per image) feeds the AQ column; omit it for plain
    detection evaluation. An empty dataset is an error.
    """
    if len(dets_per_image) == 0 or len(dets_per_image) != len(gts_per_image):
        raise ValueError(
            "need matching, non-empty detection and ground-truth lists"
        )
    labels = range(num_classes)

    per_thresh: dict[float, Optional[float]] = {}
    for t in IOU_GRID:
        per_thresh[t] = _mean(
            [
                average_precision(dets_per_image, gts_per_image, y, t)
                for y in labels
            ]
        )

    def size_map(keep) -> Optional[float]:
        vals = []
        for t in IOU_GRID:
            vals.append(
                _mean(
                    [
                        _ap_size_split(
                            dets_per_image, gts_per_image, y, t, keep
                        )
                        for y in labels
                    ]
                )
            )
        return _mean(vals)

    aq = None
    if queries is not None:
        if len(queries) == 0:
            raise ValueError("queries must be non-empty when provided")
        aq = sum(queries) / len(queries)

    return EvalReport(
        mAP=_mean(list(per_thresh.values())),
        mAP50=per_thresh[IOU_GRID[0]],
        mAP75=per_thresh[IOU_GRID[5]],
        mAP_S=size_map(_is_small),
        mAP_M=size_map(_is_medium),
        mAP_L=size_map(_is_large),
        AQ=aq,
    )
