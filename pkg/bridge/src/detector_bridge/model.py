"""Torchvision detection models adapted to the wire-record shape.

The adapter owns the model, a device, and a lock: inference is serialized
so concurrent HTTP requests stay correct without assuming the model is
thread-safe. Detections come back as plain dicts ready for JSON, with the
model's native post-NMS output filtered only by the configured score
floor. Torchvision detectors expose one score per box, so the runner-up
score field is never emitted.
"""

from __future__ import annotations

import threading

import numpy as np
import torch
import torchvision

from .config import BridgeConfig

# Attribute paths that hold the class count (background included) for the
# supported detector families: *RCNN, RetinaNet/FCOS, SSD.
_CLASS_COUNT_PROBES = (
    ("roi_heads", "box_predictor", "cls_score", "out_features"),
    ("head", "classification_head", "num_classes"),
    ("head", "classification_head", "num_columns"),
)


def _probe_num_classes(model: torch.nn.Module) -> int:
    for path in _CLASS_COUNT_PROBES:
        obj = model
        for attr in path:
            obj = getattr(obj, attr, None)
            if obj is None:
                break
        if isinstance(obj, int) and obj >= 1:
            return obj
    raise ValueError(
        f"cannot determine the class count of {type(model).__name__}; "
        "supported families: Faster/Mask R-CNN, RetinaNet, FCOS, SSD"
    )


class TorchDetector:
    """One loaded model answering one image at a time."""

    def __init__(self, cfg: BridgeConfig):
        if cfg.pretrained:
            kwargs = {"weights": "DEFAULT"}
        else:
            # Random initialization end to end; nothing is fetched.
            kwargs = {"weights": None, "weights_backbone": None}
        try:
            model = torchvision.models.get_model(cfg.model, **kwargs)
        except (ValueError, KeyError) as exc:
            raise ValueError(f"cannot load model {cfg.model!r}: {exc}") from exc
        self._device = torch.device(cfg.device)
        self._model = model.eval().to(self._device)
        self._lock = threading.Lock()
        self.score_floor = cfg.score_floor
        self.num_classes = _probe_num_classes(model)
        self.name = cfg.model

    def run(self, image: np.ndarray) -> list[dict]:
        """RGB float image in [0, 1], HxWx3 -> wire detection records."""
        tensor = (
            torch.from_numpy(np.ascontiguousarray(image))
            .to(dtype=torch.float32, device=self._device)
            .permute(2, 0, 1)
        )
        with self._lock, torch.inference_mode():
            out = self._model([tensor])[0]
        boxes = out["boxes"].cpu().numpy()
        labels = out["labels"].cpu().numpy()
        scores = out["scores"].cpu().numpy()

        rows = []
        for box, label, score in zip(boxes, labels, scores):
            s = float(score)
            if s < self.score_floor:
                continue
            rows.append(
                {
                    "box": [float(v) for v in box],
                    "label": int(label),
                    # guard the [0, 1] contract against float drift
                    "score": min(max(s, 0.0), 1.0),
                }
            )
        return rows
