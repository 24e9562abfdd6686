"""Serve the toy detector over the v1 wire protocol (stdlib HTTP server)."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .oracle import ToyDetector, ToyDetectorConfig
from .protocol import (
    ProtocolError,
    VersionMismatch,
    build_detect_response,
    build_health_response,
    parse_detect_request,
)


def _make_handler(detector: ToyDetector):
    info = detector.metadata()

    class Handler(BaseHTTPRequestHandler):
        server_version = "rectflip-toy/1"

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, status: int, code: str, message: str) -> None:
            self._send(status, {"error": {"code": code, "message": message}})

        def do_GET(self):
            if self.path == "/v1/health":
                self._send(200, build_health_response(info.num_classes, info.name))
            else:
                self._send_error(404, "not_found", f"no route {self.path}")

        def do_POST(self):
            if self.path != "/v1/detect":
                self._send_error(404, "not_found", f"no route {self.path}")
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length))
            except (ValueError, json.JSONDecodeError) as exc:
                self._send_error(400, "bad_json", f"unparseable body: {exc}")
                return
            try:
                image = parse_detect_request(payload)
            except VersionMismatch as exc:
                self._send_error(400, "version_mismatch", str(exc))
                return
            except ProtocolError as exc:
                self._send_error(400, "protocol_error", str(exc))
                return
            try:
                dets = detector.detect(image)
            except Exception as exc:
                self._send_error(500, "inference_error", str(exc))
                return
            self._send(200, build_detect_response(dets, info.num_classes))

        def log_message(self, fmt, *args):  # quiet by default
            pass

    return Handler


def make_server(
    host: str = "127.0.0.1",
    port: int = 8700,
    cfg: ToyDetectorConfig | None = None,
) -> ThreadingHTTPServer:
    detector = ToyDetector(cfg)
    return ThreadingHTTPServer((host, port), _make_handler(detector))


def serve_toy(
    host: str = "127.0.0.1",
    port: int = 8700,
    cfg: ToyDetectorConfig | None = None,
) -> None:
    """Blocking server loop; Ctrl-C to stop."""
    server = make_server(host, port, cfg)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


class BackgroundServer:
    """Context manager running the toy service on a daemon thread (tests)."""

    def __init__(self, cfg: ToyDetectorConfig | None = None, port: int = 0):
        self._server = make_server(port=port, cfg=cfg)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "BackgroundServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
