"""FastAPI application speaking the v1 detection wire protocol.

Request validation is implemented here from the protocol description, not
imported from any client library: the bridge is a separate program and
must reject malformed traffic on its own. Every error body is
{"error": {"code": ..., "message": ...}} with code bad_json,
version_mismatch, or protocol_error on 400, inference_error on 500, and
not_found on 404.
"""

from __future__ import annotations

import base64
import io
import json
from typing import Any, Optional, Protocol

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image
from starlette.concurrency import run_in_threadpool
from starlette.exceptions import HTTPException as StarletteHTTPException

from .config import BridgeConfig

PROTOCOL_VERSION = 1


class Detector(Protocol):
    """What the app needs from a model backend."""

    num_classes: int
    name: str

    def run(self, image: np.ndarray) -> list[dict]: ...


class RequestRejected(Exception):
    """Carries the wire error code for a request the service refuses."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
    )


def decode_request(body: Any) -> np.ndarray:
    """Validate a detect payload and decode its image.

    Raises RequestRejected with code version_mismatch for a wrong protocol
    number and protocol_error for every other malformation.
    """
    if not isinstance(body, dict):
        raise RequestRejected("protocol_error", "request body must be a JSON object")
    version = body.get("protocol")
    if version is None:
        raise RequestRejected("protocol_error", "missing required field: protocol")
    if version != PROTOCOL_VERSION:
        raise RequestRejected(
            "version_mismatch", f"unsupported protocol version: {version!r}"
        )
    for key in ("width", "height", "encoding", "image"):
        if key not in body:
            raise RequestRejected("protocol_error", f"missing required field: {key}")
    if body["encoding"] != "png-base64":
        raise RequestRejected(
            "protocol_error", f"unsupported encoding: {body['encoding']!r}"
        )
    width, height = body["width"], body["height"]
    if (
        isinstance(width, bool)
        or isinstance(height, bool)
        or not isinstance(width, int)
        or not isinstance(height, int)
        or min(width, height) < 1
    ):
        raise RequestRejected(
            "protocol_error", "width/height must be positive integers"
        )
    try:
        raw = base64.b64decode(body["image"], validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise RequestRejected(
            "protocol_error", f"undecodable image payload: {exc}"
        ) from exc
    if img.size != (width, height):
        raise RequestRejected(
            "protocol_error",
            f"image is {img.size[0]}x{img.size[1]}, header says {width}x{height}",
        )
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def create_app(cfg: BridgeConfig, detector: Optional[Detector] = None) -> FastAPI:
    """Build the service; a detector may be injected (tests), otherwise the
    configured torchvision model is loaded."""
    if detector is None:
        from .model import TorchDetector

        detector = TorchDetector(cfg)

    app = FastAPI(title="detector-bridge", docs_url=None, redoc_url=None)

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "protocol_error"
        return _error(exc.status_code, code, str(exc.detail))

    @app.get("/v1/health")
    async def health():
        return {
            "protocol": PROTOCOL_VERSION,
            "num_classes": detector.num_classes,
            "name": detector.name,
        }

    @app.post("/v1/detect")
    async def detect(request: Request):
        raw = await request.body()
        try:
            body = json.loads(raw)
        except ValueError as exc:
            return _error(400, "bad_json", f"unparseable body: {exc}")
        try:
            image = decode_request(body)
        except RequestRejected as exc:
            return _error(400, exc.code, str(exc))
        try:
            rows = await run_in_threadpool(detector.run, image)
        except Exception as exc:
            return _error(500, "inference_error", str(exc))
        return {
            "protocol": PROTOCOL_VERSION,
            "num_classes": detector.num_classes,
            "detections": rows,
        }

    return app
