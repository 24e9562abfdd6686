"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BridgeConfig:
    """What to serve and where.

    `model` is any torchvision detection model name (fasterrcnn_*,
    retinanet_*, fcos_*, ssd*). `score_floor` drops detections the model
    scores below it; the model's own NMS and thresholds are otherwise
    reported as-is. `pretrained` resolves the default COCO weights; turn
    it off to serve a randomly initialized network (offline smoke tests).
    """

    model: str = "fasterrcnn_resnet50_fpn"
    device: str = "cpu"
    score_floor: float = 0.05
    host: str = "127.0.0.1"
    port: int = 8800
    pretrained: bool = True

    def __post_init__(self):
        if not self.model:
            raise ValueError("model name must be non-empty")
        if not self.device:
            raise ValueError("device must be non-empty")
        if not 0.0 <= self.score_floor < 1.0:
            raise ValueError(
                f"score_floor must be in [0, 1), got {self.score_floor}"
            )
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port must be in [0, 65535], got {self.port}")
