"""Square-patch perturbations, their schedules, and candidate assembly.

A candidate perturbation is built by stamping one or more square patches
onto the incumbent perturbation. Patch side length and the number of
patches per query both follow piecewise-constant schedules that halve at
fixed query milestones, so the search coarsens early and refines late.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ScheduleConfig:
    """Perturbation budget schedules and the pixel-space ball radius."""

    epsilon: float = 0.05
    e0: float = 0.05
    e_milestones: Tuple[int, ...] = (20, 100, 400, 1000, 2000, 4000, 8000)
    p0: int = 4
    p_milestones: Tuple[int, ...] = (20, 100, 1000, 2000)

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.e0 <= 0.0 or self.p0 < 1:
            raise ValueError("e0 must be positive and p0 >= 1")
        if list(self.e_milestones) != sorted(self.e_milestones):
            raise ValueError("e_milestones must be ascending")
        if list(self.p_milestones) != sorted(self.p_milestones):
            raise ValueError("p_milestones must be ascending")


def side_at(q: int, width: int, height: int, cfg: ScheduleConfig) -> int:
    """Patch side at query q: max(2, round(sqrt(e_q * w * h))).

    The area fraction e_q starts at cfg.e0 and halves at each milestone
    already reached (milestone <= q). Rounding is half-up.
    """
    if q < 0:
        raise ValueError(f"query index must be >= 0, got {q}")
    k = sum(1 for m in cfg.e_milestones if m <= q)
    e_q = cfg.e0 * 2.0 ** (-k)
    return max(2, _round_half_up(math.sqrt(e_q * width * height)))


def parallel_at(q: int, cfg: ScheduleConfig) -> int:
    """Patches per query at query q: p0 halved at each reached milestone."""
    if q < 0:
        raise ValueError(f"query index must be >= 0, got {q}")
    k = sum(1 for m in cfg.p_milestones if m <= q)
    return max(1, cfg.p0 // (2**k))


@dataclass(frozen=True)
class Patch:
    """A square stamp: origin (row, col), side length, and its values."""

    row: int
    col: int
    side: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"patch side must be >= 1, got {self.side}")
        if self.values.shape != (self.side, self.side, 3):
            raise ValueError(
                f"patch values shape {self.values.shape} does not match "
                f"side {self.side}"
            )


def sample_square(rng: np.random.Generator, side: int, epsilon: float) -> Patch:
    """Draw a patch whose channels are each constant at -epsilon or +epsilon.

    The three channel signs are independent; origin is filled in later by the
    caller. Returned patch sits at (0, 0) until re-anchored.
    """
    signs = rng.integers(0, 2, size=3) * 2 - 1
    values = np.broadcast_to(
        signs.astype(np.float64) * epsilon, (side, side, 3)
    ).copy()
    return Patch(row=0, col=0, side=side, values=values)


def at_origin(patch: Patch, row: int, col: int) -> Patch:
    """The same patch re-anchored at (row, col)."""
    return Patch(row=row, col=col, side=patch.side, values=patch.values)


def flipped(patch: Patch, orientation: str) -> Patch:
    """Negate the first floor(side/2) columns ("horizontal") or rows ("vertical")."""
    if orientation not in ("horizontal", "vertical"):
        raise ValueError(f"unknown flip orientation: {orientation!r}")
    half = patch.side // 2
    values = patch.values.copy()
    if orientation == "horizontal":
        values[:, :half, :] *= -1.0
    else:
        values[:half, :, :] *= -1.0
    return Patch(row=patch.row, col=patch.col, side=patch.side, values=values)


def flip_half(patch: Patch, rng: np.random.Generator) -> Patch:
    """Flip the sign of half the patch along a random axis.

    Patches of side < 2 cannot be split and come back unchanged without
    consuming randomness.
    """
    if patch.side < 2:
        return patch
    orientation = "horizontal" if rng.integers(0, 2) == 0 else "vertical"
    return flipped(patch, orientation)


def apply_and_project(
    x: np.ndarray,
    base: np.ndarray,
    patches: Sequence[Patch],
    epsilon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Stamp patches onto a copy of `base`, then project into the threat model.

    Later patches overwrite earlier ones where they overlap. The perturbation
    is clamped to [-epsilon, +epsilon] elementwise and the perturbed image to
    [0, 1]. Returns (candidate image, candidate perturbation). Patches that
    stick out of the image are an error.
    """
    h, w = x.shape[:2]
    delta = base.copy()
    for p in patches:
        if p.row < 0 or p.col < 0 or p.row + p.side > h or p.col + p.side > w:
            raise ValueError(
                f"patch ({p.row}, {p.col}, side {p.side}) leaves the "
                f"{h}x{w} image"
            )
        delta[p.row : p.row + p.side, p.col : p.col + p.side, :] = p.values
    np.clip(delta, -epsilon, epsilon, out=delta)
    candidate = np.clip(x + delta, 0.0, 1.0)
    return candidate, delta
