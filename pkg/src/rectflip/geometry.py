"""Axis-aligned boxes and overlap arithmetic.

Boxes are corner-form (x1, y1, x2, y2) in continuous pixel coordinates,
x along columns and y along rows. Degenerate boxes (zero width or height)
are legal and have zero area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Box:
    """Rectangle with x1 <= x2 and y1 <= y2, all coordinates finite."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate: {self!r}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"inverted box corners: {self!r}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1


def area(box: Box) -> float:
    """Area of a box; zero for degenerate boxes."""
    return box.width * box.height


def intersection(a: Box, b: Box) -> float:
    """Area of the overlap region of two boxes."""
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: Box, b: Box) -> float:
    """Intersection over union in [0, 1]; zero when the union is empty."""
    inter = intersection(a, b)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union
