"""Synthetic rectangle scenes for exercising the toy detector end to end.

Scene geometry is chosen so the clean toy detector is provably right:
objects are single-window-sized, grid-aligned squares whose dominant
window fills completely (score 1.0) and overlaps the truth box exactly,
while every stray candidate window scores strictly lower and sits below
the matching threshold. Object colors sit just inside the classifier's
color tolerance, so small pixel-space perturbations can push pixels out
of their class: the scenes are attackable at tight budgets by design.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Box
from .objective import GroundTruthObject
from .search import DatasetItem

IMAGE_SIDE = 64
OBJECT_SIDE = 16
BACKGROUND = 128.0 / 255.0

# Object fill colors, one per class, as exact 8-bit values so a PNG round
# trip is lossless. Each color sits at Chebyshev distance 69/255 ~ 0.271
# from its pure class color: inside the 0.3 tolerance, but within one
# 0.05-step of leaving it. One off-channel is also near the boundary so
# two of the three channels offer an escape direction.
_HI = 186.0 / 255.0  # class channel (escape: decrease)
_NEAR = 69.0 / 255.0  # boundary off-channel (escape: increase)
_FAR = 5.0 / 255.0  # inert off-channel

OBJECT_COLORS = (
    (_HI, _NEAR, _FAR),  # class 0, reddish
    (_FAR, _HI, _NEAR),  # class 1, greenish
    (_NEAR, _FAR, _HI),  # class 2, bluish
)

# Stride-aligned anchor slots with enough clearance that windows never
# straddle two objects.
SLOTS = ((8, 8), (8, 40), (40, 8), (40, 40))


@dataclass(frozen=True)
class SceneSpec:
    name: str
    objects: tuple[tuple[int, int, int], ...]  # (row, col, label)


def _render(spec: SceneSpec) -> DatasetItem:
    img = np.full((IMAGE_SIDE, IMAGE_SIDE, 3), BACKGROUND, dtype=np.float64)
    gts = []
    for row, col, label in spec.objects:
        img[row : row + OBJECT_SIDE, col : col + OBJECT_SIDE, :] = OBJECT_COLORS[
            label
        ]
        gts.append(
            GroundTruthObject(
                box=Box(
                    float(col),
                    float(row),
                    float(col + OBJECT_SIDE),
                    float(row + OBJECT_SIDE),
                ),
                label=label,
            )
        )
    return DatasetItem(name=spec.name, image=img, gts=tuple(gts))


def make_suite(count: int, seed: int, objects_per_image: int = 3) -> list[DatasetItem]:
    """Deterministic scene list: `objects_per_image` squares per image.

    Slots and labels are drawn from a generator seeded with `seed`, so the
    same arguments always produce the same scenes.
    """
    if not 1 <= objects_per_image <= len(SLOTS):
        raise ValueError(
            f"objects_per_image must be in [1, {len(SLOTS)}], "
            f"got {objects_per_image}"
        )
    rng = np.random.default_rng(seed)
    items = []
    for i in range(count):
        slot_idx = rng.choice(len(SLOTS), size=objects_per_image, replace=False)
        labels = rng.permutation(len(OBJECT_COLORS))
        objects = tuple(
            (SLOTS[int(s)][0], SLOTS[int(s)][1], int(labels[j % len(labels)]))
            for j, s in enumerate(sorted(slot_idx.tolist()))
        )
        items.append(_render(SceneSpec(name=f"scene_{i:03d}.png", objects=objects)))
    return items


def write_suite(
    out_dir: str | Path, items: Sequence[DatasetItem], num_classes: int = 3
) -> Path:
    """Write scene PNGs plus the annotation file; returns the annotation path."""
    from .images import save_image

    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    annotations: dict[str, list[dict]] = {}
    for item in items:
        save_image(images_dir / item.name, item.image)
        annotations[item.name] = [
            {
                "label": g.label,
                "box": [g.box.x1, g.box.y1, g.box.x2, g.box.y2],
            }
            for g in item.gts
        ]
    ann_path = out / "annotations.json"
    ann_path.write_text(
        json.dumps(
            {"num_classes": num_classes, "images": annotations},
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )
    return ann_path
