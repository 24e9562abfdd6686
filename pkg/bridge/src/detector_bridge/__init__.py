"""Serve real torchvision detectors behind the v1 detection wire protocol."""

from .app import PROTOCOL_VERSION, create_app, decode_request
from .config import BridgeConfig

__all__ = ["BridgeConfig", "PROTOCOL_VERSION", "create_app", "decode_request"]
