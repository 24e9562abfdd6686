"""PNG loading and saving with [0, 1] float pixel values."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def load_image(path: str | Path) -> np.ndarray:
    """Read a PNG as HxWx3 float64 in [0, 1].

    8-bit images divide by 255, 16-bit by 65535 (full-scale normalization);
    grayscale is replicated across channels and alpha is dropped.
    """
    img = Image.open(path)
    if img.mode in ("I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
        return np.repeat(arr[:, :, None], 3, axis=2)
    if img.mode == "I":
        # 32-bit integer mode is how Pillow surfaces some 16-bit PNGs.
        arr = np.asarray(img, dtype=np.float64)
        return np.repeat((arr / 65535.0)[:, :, None], 3, axis=2)
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float64) / 255.0
        return np.repeat(arr[:, :, None], 3, axis=2)
    if img.mode == "RGBA":
        img = img.convert("RGB")
    elif img.mode != "RGB":
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return arr


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] floats to 8-bit with round-to-nearest."""
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def save_image(path: str | Path, image: np.ndarray) -> None:
    """Write an HxWx3 [0, 1] float image as an 8-bit RGB PNG."""
    Image.fromarray(to_uint8(image), mode="RGB").save(path, format="PNG")


def encode_delta(delta: np.ndarray, epsilon: float) -> np.ndarray:
    """Map a perturbation in [-eps, +eps] to displayable [0, 1] per channel."""
    return np.clip(delta / (2.0 * epsilon) + 0.5, 0.0, 1.0)
