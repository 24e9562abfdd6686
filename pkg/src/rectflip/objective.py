"""Detection-suppression objective and the success predicate.

The attack minimizes a score that mixes two regimes per (detection, truth)
pair of the same class: overlap while the detector is still confident, and
a classification margin once confidence drops below the gate zeta. Driving
the score down therefore first shrinks or displaces confident boxes, then
pushes their class evidence toward the runner-up class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import Box, iou


@dataclass(frozen=True)
class Detection:
    """One predicted box with its class, confidence, and optional runner-up."""

    box: Box
    label: int
    score: float
    score2: Optional[float] = None

    def __post_init__(self):
        if self.label < 0:
            raise ValueError(f"negative label: {self.label}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0, 1]: {self.score}")
        if self.score2 is not None and not 0.0 <= self.score2 <= self.score:
            raise ValueError(
                f"score2 must satisfy 0 <= score2 <= score, got {self.score2}"
            )


@dataclass(frozen=True)
class GroundTruthObject:
    box: Box
    label: int

    def __post_init__(self):
        if self.label < 0:
            raise ValueError(f"negative label: {self.label}")


@dataclass(frozen=True)
class ObjectiveConfig:
    """Knobs for the objective: confidence gate, margin weight, IoU gate."""

    num_classes: int
    zeta: float = 0.90
    lam: float = 1.0
    iou_threshold: float = 0.50

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta outside [0, 1]: {self.zeta}")


def _margin(det: Detection, num_classes: int) -> float:
    """Gap between the detection's class score and the runner-up class.

    When the oracle does not expose a runner-up score, the remaining mass
    (1 - score) is assumed to spread evenly over the other classes.
    """
    if det.score2 is not None:
        return det.score - det.score2
    return det.score - (1.0 - det.score) / max(num_classes - 1, 1)


def objective_h(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    cfg: ObjectiveConfig,
) -> float:
    """Attack objective: summed per same-class (detection, truth) pair.

    Confident detections (score >= zeta) contribute their IoU with the truth
    box; below the gate each pair contributes lam * margin instead. Empty
    detection lists score 0. Labels at or above cfg.num_classes are invalid.
    """
    for d in dets:
        if d.label >= cfg.num_classes:
            raise ValueError(f"detection label {d.label} >= Y={cfg.num_classes}")
    for g in gts:
        if g.label >= cfg.num_classes:
            raise ValueError(f"ground-truth label {g.label} >= Y={cfg.num_classes}")

    by_label: dict[int, list[GroundTruthObject]] = {}
    for g in gts:
        by_label.setdefault(g.label, []).append(g)

    total = 0.0
    for d in dets:
        group = by_label.get(d.label)
        if not group:
            continue
        if d.score >= cfg.zeta:
            total += sum(iou(d.box, g.box) for g in group)
        else:
            total += cfg.lam * _margin(d, cfg.num_classes) * len(group)
    return total


def attack_succeeded(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    cfg: ObjectiveConfig,
) -> bool:
    """True when no detection still localizes any truth object of its class.

    Every (detection, truth) pair must either overlap below cfg.iou_threshold
    or disagree on the label. Vacuously true with no detections.
    """
    for d in dets:
        for g in gts:
            if d.label == g.label and iou(d.box, g.box) >= cfg.iou_threshold:
                return False
    return True
