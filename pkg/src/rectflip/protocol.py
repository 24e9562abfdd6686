"""Version-1 JSON wire format for detector oracles.

Request:  POST /v1/detect
  {"protocol": 1, "width": W, "height": H,
   "encoding": "png-base64", "image": "<base64 PNG>"}
Response:
  {"protocol": 1, "num_classes": Y,
   "detections": [{"box": [x1, y1, x2, y2], "label": int,
                   "score": float, "score2": float (optional)}]}

Unknown fields are ignored on both sides; missing required fields are
protocol errors. Health endpoint: GET /v1/health ->
  {"protocol": 1, "num_classes": Y, "name": "<detector>"}
"""

from __future__ import annotations

import base64
import io
from typing import Any, Sequence

import numpy as np
from PIL import Image

from .geometry import Box
from .objective import Detection

PROTOCOL_VERSION = 1


class ProtocolError(ValueError):
    """Malformed or missing request/response fields."""


class VersionMismatch(ProtocolError):
    """Peer speaks a different protocol version."""


class PayloadValidationError(ValueError):
    """Well-formed message whose values violate detection invariants."""


def encode_image(image: np.ndarray) -> str:
    """Base64 PNG of a [0, 1] float image (8-bit quantization)."""
    arr = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(data: str, width: int, height: int) -> np.ndarray:
    """Inverse of encode_image; dimension mismatches are protocol errors."""
    try:
        raw = base64.b64decode(data, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise ProtocolError(f"undecodable image payload: {exc}") from exc
    if img.size != (width, height):
        raise ProtocolError(
            f"image is {img.size[0]}x{img.size[1]}, "
            f"header says {width}x{height}"
        )
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def build_detect_request(image: np.ndarray) -> dict[str, Any]:
    h, w = image.shape[:2]
    return {
        "protocol": PROTOCOL_VERSION,
        "width": w,
        "height": h,
        "encoding": "png-base64",
        "image": encode_image(image),
    }


def parse_detect_request(payload: Any) -> np.ndarray:
    """Validate a detect request and return the decoded image."""
    if not isinstance(payload, dict):
        raise ProtocolError("request body must be a JSON object")
    version = payload.get("protocol")
    if version is None:
        raise ProtocolError("missing required field: protocol")
    if version != PROTOCOL_VERSION:
        raise VersionMismatch(f"unsupported protocol version: {version!r}")
    for key in ("width", "height", "encoding", "image"):
        if key not in payload:
            raise ProtocolError(f"missing required field: {key}")
    if payload["encoding"] != "png-base64":
        raise ProtocolError(f"unsupported encoding: {payload['encoding']!r}")
    width, height = payload["width"], payload["height"]
    if not isinstance(width, int) or not isinstance(height, int) or min(width, height) < 1:
        raise ProtocolError("width/height must be positive integers")
    return decode_image(payload["image"], width, height)


def build_detect_response(
    dets: Sequence[Detection], num_classes: int
) -> dict[str, Any]:
    out = []
    for d in dets:
        row: dict[str, Any] = {
            "box": [d.box.x1, d.box.y1, d.box.x2, d.box.y2],
            "label": d.label,
            "score": d.score,
        }
        if d.score2 is not None:
            row["score2"] = d.score2
        out.append(row)
    return {
        "protocol": PROTOCOL_VERSION,
        "num_classes": num_classes,
        "detections": out,
    }


def parse_detect_response(payload: Any) -> tuple[list[Detection], int]:
    """Validate a detect response; returns (detections, num_classes)."""
    if not isinstance(payload, dict):
        raise ProtocolError("response body must be a JSON object")
    version = payload.get("protocol")
    if version is None:
        raise ProtocolError("missing required field: protocol")
    if version != PROTOCOL_VERSION:
        raise VersionMismatch(f"unsupported protocol version: {version!r}")
    for key in ("num_classes", "detections"):
        if key not in payload:
            raise ProtocolError(f"missing required field: {key}")
    num_classes = payload["num_classes"]
    if not isinstance(num_classes, int) or num_classes < 1:
        raise ProtocolError(f"bad num_classes: {num_classes!r}")
    rows = payload["detections"]
    if not isinstance(rows, list):
        raise ProtocolError("detections must be a list")

    dets: list[Detection] = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ProtocolError(f"detection {i} is not an object")
        for key in ("box", "label", "score"):
            if key not in row:
                raise ProtocolError(f"detection {i} missing field: {key}")
        box = row["box"]
        if (
            not isinstance(box, list)
            or len(box) != 4
            or not all(isinstance(v, (int, float)) for v in box)
        ):
            raise ProtocolError(f"detection {i} has a malformed box")
        label = row["label"]
        if not isinstance(label, int) or isinstance(label, bool):
            raise ProtocolError(f"detection {i} has a non-integer label")
        score = row["score"]
        score2 = row.get("score2")
        try:
            dets.append(
                Detection(
                    box=Box(*(float(v) for v in box)),
                    label=label,
                    score=float(score),
                    score2=None if score2 is None else float(score2),
                )
            )
        except (TypeError, ValueError) as exc:
            raise PayloadValidationError(
                f"detection {i} violates invariants: {exc}"
            ) from exc
        if label >= num_classes:
            raise PayloadValidationError(
                f"detection {i} label {label} >= num_classes {num_classes}"
            )
    return dets, num_classes


def build_health_response(num_classes: int, name: str) -> dict[str, Any]:
    return {
        "protocol": PROTOCOL_VERSION,
        "num_classes": num_classes,
        "name": name,
    }
