"""HTTP client presenting a remote detection service as a DetectorOracle."""

from __future__ import annotations

import numpy as np
import requests

from .oracle import DetectorOracle, OracleInfo
from .protocol import (
    PayloadValidationError,
    ProtocolError,
    build_detect_request,
    parse_detect_response,
)


class TransportError(RuntimeError):
    """Network-level failure talking to the detector service."""


class RemoteDetector(DetectorOracle):
    """Oracle backed by a v1 wire-protocol endpoint.

    `endpoint` is the service base URL (e.g. http://127.0.0.1:8700); class
    count is read lazily from the first response or from /v1/health.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, name: str = "http"):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._name = name
        self._num_classes: int | None = None

    def detect(self, image: np.ndarray):
        payload = build_detect_request(image)
        try:
            resp = requests.post(
                f"{self.endpoint}/v1/detect", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"detect request failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"detect returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"response is not JSON: {exc}") from exc
        dets, num_classes = parse_detect_response(body)
        self._num_classes = num_classes
        return dets

    def metadata(self) -> OracleInfo:
        if self._num_classes is None:
            try:
                resp = requests.get(
                    f"{self.endpoint}/v1/health", timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise TransportError(f"health request failed: {exc}") from exc
            if resp.status_code != 200:
                raise TransportError(
                    f"health returned HTTP {resp.status_code}"
                )
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"health response is not JSON: {exc}") from exc
            if not isinstance(body, dict) or "num_classes" not in body:
                raise ProtocolError("health response missing num_classes")
            n = body["num_classes"]
            if not isinstance(n, int) or n < 1:
                raise ProtocolError(f"bad num_classes in health: {n!r}")
            self._num_classes = n
            if isinstance(body.get("name"), str):
                self._name = body["name"]
        return OracleInfo(num_classes=self._num_classes, name=self._name)


__all__ = [
    "RemoteDetector",
    "TransportError",
    "ProtocolError",
    "PayloadValidationError",
]
