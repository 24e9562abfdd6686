"""Detector oracles: the interface, a self-contained toy detector, and NMS.

The toy detector classifies pixels by nearest color within a tolerance,
slides square windows over the image, and keeps windows that are filled
past a threshold with one class. It is deliberately simple but exhibits
the behaviours that matter for black-box attacks on real detectors:
greedy suppression, runner-up windows that surface when the winner is
degraded, and a confidence that moves smoothly with pixel changes.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .geometry import Box, iou
from .objective import Detection


@dataclass(frozen=True)
class OracleInfo:
    num_classes: int
    name: str


class DetectorOracle(ABC):
    """Black-box detector: image in, detections out."""

    @abstractmethod
    def detect(self, image: np.ndarray) -> list[Detection]:
        """Run the detector on an RGB float image in [0, 1], HxWx3."""

    @abstractmethod
    def metadata(self) -> OracleInfo:
        """Class count and a human-readable name."""


@dataclass(frozen=True)
class ToyDetectorConfig:
    class_colors: Tuple[Tuple[float, float, float], ...] = (
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    )
    tolerance: float = 0.3
    window_sizes: Tuple[int, ...] = (16, 24, 32)
    stride: int = 4
    fill_threshold: float = 0.5
    nms_iou: float = 0.5

    @property
    def num_classes(self) -> int:
        return len(self.class_colors)

    def __post_init__(self):
        if not self.class_colors:
            raise ValueError("need at least one class color")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if any(s < 1 for s in self.window_sizes):
            raise ValueError("window sizes must be >= 1")


def classify_pixels(image: np.ndarray, cfg: ToyDetectorConfig) -> np.ndarray:
    """Per-pixel labels: nearest class color within tolerance, else -1.

    Distance is Chebyshev (max over channels); ties go to the smaller
    class index.
    """
    colors = np.asarray(cfg.class_colors, dtype=np.float64)  # (Y, 3)
    # (Y, H, W) distances; argmin breaks ties toward smaller class index.
    dist = np.abs(image[None, :, :, :] - colors[:, None, None, :]).max(axis=3)
    best = dist.argmin(axis=0)
    labels = np.where(
        np.take_along_axis(dist, best[None], axis=0)[0] < cfg.tolerance,
        best,
        -1,
    )
    return labels.astype(np.int64)


def _window_fills(
    labels: np.ndarray, side: int, stride: int, num_classes: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fill fractions for all grid windows of one size, via integral images.

    Returns (rows, cols, fills) where fills has shape (Y, nR, nC).
    """
    h, w = labels.shape
    rows = np.arange(0, h - side + 1, stride)
    cols = np.arange(0, w - side + 1, stride)
    onehot = labels[None, :, :] == np.arange(num_classes)[:, None, None]
    sat = np.zeros((num_classes, h + 1, w + 1), dtype=np.float64)
    sat[:, 1:, 1:] = onehot.cumsum(axis=1).cumsum(axis=2)
    r0 = rows[:, None]
    c0 = cols[None, :]
    counts = (
        sat[:, r0 + side, c0 + side]
        - sat[:, r0, c0 + side]
        - sat[:, r0 + side, c0]
        + sat[:, r0, c0]
    )
    return rows, cols, counts / float(side * side)


def _sort_key(d: Detection) -> tuple:
    # Highest score first, then top-left-most, then smallest window.
    return (-d.score, d.box.y1, d.box.x1, d.box.x2 - d.box.x1, d.label)


def nms(cands: Sequence[Detection], iou_thresh: float) -> list[Detection]:
    """Greedy per-class suppression.

    Candidates are visited by descending score (ties: smaller row, then
    column, then window size); each survivor suppresses later same-class
    candidates overlapping it at IoU >= iou_thresh.
    """
    kept: list[Detection] = []
    for cand in sorted(cands, key=_sort_key):
        suppressed = False
        for k in kept:
            if k.label == cand.label and iou(k.box, cand.box) >= iou_thresh:
                suppressed = True
                break
        if not suppressed:
            kept.append(cand)
    return kept


def toy_detect(image: np.ndarray, cfg: ToyDetectorConfig) -> list[Detection]:
    """Sliding-window color detector.

    Each grid window is scored by the fill fraction of its dominant class;
    windows past the fill threshold become candidates carrying the
    runner-up class fill as score2, then greedy per-class NMS keeps the
    survivors, sorted by descending score.
    """
    h, w = image.shape[:2]
    if min(h, w) < max(cfg.window_sizes):
        raise ValueError(
            f"image {h}x{w} smaller than the largest window "
            f"{max(cfg.window_sizes)}"
        )
    labels = classify_pixels(image, cfg)
    y = cfg.num_classes
    cands: list[Detection] = []
    for side in cfg.window_sizes:
        rows, cols, fills = _window_fills(labels, side, cfg.stride, y)
        if y == 1:
            top = np.zeros_like(fills[0], dtype=np.int64)
            top_fill = fills[0]
            second_fill = np.zeros_like(top_fill)
        else:
            order = np.argsort(-fills, axis=0, kind="stable")
            top = order[0]
            top_fill = np.take_along_axis(fills, order[0][None], axis=0)[0]
            second_fill = np.take_along_axis(fills, order[1][None], axis=0)[0]
        ri, ci = np.nonzero(top_fill >= cfg.fill_threshold)
        for i, j in zip(ri.tolist(), ci.tolist()):
            r, c = int(rows[i]), int(cols[j])
            cands.append(
                Detection(
                    box=Box(float(c), float(r), float(c + side), float(r + side)),
                    label=int(top[i, j]),
                    score=float(top_fill[i, j]),
                    score2=float(second_fill[i, j]),
                )
            )
    return sorted(nms(cands, cfg.nms_iou), key=_sort_key)


class ToyDetector(DetectorOracle):
    """Deterministic local oracle around toy_detect."""

    def __init__(self, cfg: ToyDetectorConfig | None = None):
        self.cfg = cfg or ToyDetectorConfig()

    def detect(self, image: np.ndarray) -> list[Detection]:
        return toy_detect(image, self.cfg)

    def metadata(self) -> OracleInfo:
        return OracleInfo(num_classes=self.cfg.num_classes, name="toy")
