"""Search-space priors: where patch origins are allowed to land.

The detector's own predicted boxes, dilated a little, make a good guess at
where perturbations matter; restricting patch origins to that region spends
queries near the objects instead of on empty background. A mask can also be
supplied as a grayscale image for externally chosen regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from PIL import Image

from .geometry import Box


def default_dilation(width: int, height: int) -> int:
    """Default box dilation: 10% of the geometric mean image side."""
    return int(round(0.10 * math.sqrt(width * height)))


@dataclass
class SearchMask:
    """Boolean grid of admissible patch origins for one image."""

    width: int
    height: int
    admissible: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.admissible.shape != (self.height, self.width):
            raise ValueError(
                f"mask shape {self.admissible.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if self.admissible.dtype != np.bool_:
            raise ValueError("mask must be boolean")
        # Feasible-origin indices are memoized per side; sampling happens once
        # per query and recomputing the index set each time is the slow part.
        self._origins: dict[int, np.ndarray] = {}

    def origins_for(self, side: int) -> np.ndarray:
        """Flat indices of admissible origins where a side x side patch fits."""
        cached = self._origins.get(side)
        if cached is None:
            fit = self.admissible[
                : self.height - side + 1, : self.width - side + 1
            ]
            rows, cols = np.nonzero(fit)
            cached = rows * self.width + cols
            self._origins[side] = cached
        return cached


def full_mask(width: int, height: int) -> SearchMask:
    """Mask admitting every origin."""
    return SearchMask(
        width=width,
        height=height,
        admissible=np.ones((height, width), dtype=bool),
    )


def mask_from_boxes(
    boxes: Sequence[Box], dilation: float, width: int, height: int
) -> SearchMask:
    """Admissible region = union of the boxes, each grown by `dilation`.

    Grown regions are clipped to the image. An empty box list falls back to
    the full-image mask so the search never stalls without a prior.
    """
    if not boxes:
        return full_mask(width, height)
    grid = np.zeros((height, width), dtype=bool)
    for b in boxes:
        r1 = max(int(math.floor(b.y1 - dilation)), 0)
        c1 = max(int(math.floor(b.x1 - dilation)), 0)
        r2 = min(int(math.ceil(b.y2 + dilation)), height)
        c2 = min(int(math.ceil(b.x2 + dilation)), width)
        if r2 > r1 and c2 > c1:
            grid[r1:r2, c1:c2] = True
    if not grid.any():
        return full_mask(width, height)
    return SearchMask(width=width, height=height, admissible=grid)


def mask_from_file(path: str, width: int, height: int) -> SearchMask:
    """Load an origin mask from a grayscale image: intensity > 0.5 admits.

    The image must match the attack image's dimensions exactly. An all-zero
    mask falls back to the full image rather than leaving nowhere to search.
    """
    img = Image.open(path).convert("L")
    if img.size != (width, height):
        raise ValueError(
            f"mask size {img.size} does not match image {(width, height)}"
        )
    arr = np.asarray(img, dtype=np.float64) / 255.0
    admissible = arr > 0.5
    if not admissible.any():
        return full_mask(width, height)
    return SearchMask(width=width, height=height, admissible=admissible)


def sample_origin(
    mask: SearchMask, side: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Uniform origin among admissible positions where the patch fits.

    If the admissible set leaves no room for the patch, sampling falls back
    to all in-bounds origins. A patch larger than the image is an error.
    """
    if side > min(mask.width, mask.height):
        raise ValueError(
            f"patch side {side} exceeds image "
            f"{mask.height}x{mask.width}"
        )
    feasible = mask.origins_for(side)
    if feasible.size == 0:
        row = int(rng.integers(0, mask.height - side + 1))
        col = int(rng.integers(0, mask.width - side + 1))
        return row, col
    flat = int(feasible[rng.integers(0, feasible.size)])
    return flat // mask.width, flat % mask.width
