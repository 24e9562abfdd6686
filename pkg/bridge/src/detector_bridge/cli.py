"""Command line for the bridge: flags override BRIDGE_* environment variables.

    detector-bridge --model fasterrcnn_resnet50_fpn --port 8800
    BRIDGE_MODEL=retinanet_resnet50_fpn detector-bridge --score-floor 0.3
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .config import BridgeConfig

_ENV_PREFIX = "BRIDGE_"


def _env(name: str, fallback):
    return os.environ.get(_ENV_PREFIX + name.upper(), fallback)


def build_parser() -> argparse.ArgumentParser:
    defaults = BridgeConfig.__dataclass_fields__
    parser = argparse.ArgumentParser(
        prog="detector-bridge",
        description="Serve a torchvision detector behind the v1 wire protocol.",
    )
    parser.add_argument(
        "--model", default=_env("model", defaults["model"].default),
        help="torchvision detection model name",
    )
    parser.add_argument(
        "--device", default=_env("device", defaults["device"].default),
        help="torch device (cpu, cuda, cuda:0, ...)",
    )
    parser.add_argument(
        "--score-floor", type=float,
        default=float(_env("score_floor", defaults["score_floor"].default)),
        help="drop detections the model scores below this",
    )
    parser.add_argument(
        "--host", default=_env("host", defaults["host"].default)
    )
    parser.add_argument(
        "--port", type=int, default=int(_env("port", defaults["port"].default))
    )
    parser.add_argument(
        "--random-weights", action="store_true",
        default=bool(_env("random_weights", "")),
        help="skip pretrained weights (offline smoke testing)",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = BridgeConfig(
            model=args.model,
            device=args.device,
            score_floor=args.score_floor,
            host=args.host,
            port=args.port,
            pretrained=not args.random_weights,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    import uvicorn

    from .app import create_app

    try:
        app = create_app(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"serving {cfg.model} ({'pretrained' if cfg.pretrained else 'random weights'}) "
        f"on http://{cfg.host}:{cfg.port}"
    )
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
