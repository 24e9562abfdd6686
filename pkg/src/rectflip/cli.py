"""Command-line front end: dataset ingestion, attacks, metrics, serving.

Configuration precedence, highest first: explicit flags, the RECTFLIP_ENDPOINT
environment variable (endpoint only), a TOML config file, built-in defaults.
The defaults reproduce the reference parameter setting with zero flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .geometry import Box
from .images import encode_delta, load_image, save_image
from .metrics import EvalReport, evaluate
from .objective import GroundTruthObject, ObjectiveConfig
from .oracle import DetectorOracle, ToyDetector
from .perturbation import ScheduleConfig
from .remote import RemoteDetector
from .search import (
    AttackConfig,
    AttackMode,
    AttackResult,
    DatasetItem,
    run_batch,
)

ENDPOINT_ENV = "RECTFLIP_ENDPOINT"

_DEFAULTS: dict[str, Any] = {
    "mode": "prfa",
    "oracle": "toy",
    "endpoint": "http://127.0.0.1:8700",
    "budget": 2000,
    "seed": 0,
    "epsilon": 0.05,
    "zeta": 0.90,
    "lambda": 1.0,
    "iou_threshold": 0.50,
    "dilation": None,
    "workers": 1,
    "timeout": 30.0,
    "e0": 0.05,
    "e_milestones": [20, 100, 400, 1000, 2000, 4000, 8000],
    "p0": 4,
    "p_milestones": [20, 100, 1000, 2000],
}


class CLIError(RuntimeError):
    pass


@dataclass
class RunConfig:
    mode: AttackMode
    oracle: str
    endpoint: str
    budget: int
    seed: int
    epsilon: float
    zeta: float
    lam: float
    iou_threshold: float
    dilation: Optional[float]
    workers: int
    timeout: float
    schedule: ScheduleConfig
    images_dir: Optional[Path] = None
    annotations: Optional[Path] = None
    out_dir: Optional[Path] = None

    def report_dict(self) -> dict[str, Any]:
        """Config as serialized into reports: no paths, so identical runs
        into different directories produce identical bytes."""
        return {
            "mode": self.mode.value,
            "oracle": self.oracle,
            "budget": self.budget,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "zeta": self.zeta,
            "lambda": self.lam,
            "iou_threshold": self.iou_threshold,
            "dilation": self.dilation,
            "workers": self.workers,
            "e0": self.schedule.e0,
            "e_milestones": list(self.schedule.e_milestones),
            "p0": self.schedule.p0,
            "p_milestones": list(self.schedule.p_milestones),
        }


def _load_toml(path: Path) -> dict[str, Any]:
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read config file: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise CLIError(f"malformed config file {path}: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file, environment, and flags."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = _load_toml(Path(args.config))
        unknown = set(file_cfg) - set(_DEFAULTS)
        if unknown:
            raise CLIError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    env_endpoint = os.environ.get(ENDPOINT_ENV)
    if env_endpoint:
        merged["endpoint"] = env_endpoint
    flag_map = {
        "mode": "mode",
        "oracle": "oracle",
        "endpoint": "endpoint",
        "budget": "budget",
        "seed": "seed",
        "epsilon": "epsilon",
        "zeta": "zeta",
        "lam": "lambda",
        "iou_threshold": "iou_threshold",
        "dilation": "dilation",
        "workers": "workers",
        "timeout": "timeout",
        "e0": "e0",
        "p0": "p0",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    for attr, key in (("e_milestones", "e_milestones"), ("p_milestones", "p_milestones")):
        value = getattr(args, attr, None)
        if value is not None:
            try:
                merged[key] = [int(v) for v in value.split(",") if v.strip()]
            except ValueError as exc:
                raise CLIError(f"bad --{attr.replace('_', '-')}: {exc}") from exc

    try:
        mode = AttackMode(merged["mode"])
    except ValueError:
        raise CLIError(
            f"unknown mode {merged['mode']!r}; choose from "
            f"{[m.value for m in AttackMode]}"
        )
    if merged["oracle"] not in ("toy", "http"):
        raise CLIError(f"unknown oracle {merged['oracle']!r}; choose toy or http")
    if int(merged["budget"]) < 0:
        raise CLIError("budget must be >= 0")
    if int(merged["workers"]) < 1:
        raise CLIError("workers must be >= 1")
    if not 0.0 < float(merged["epsilon"]) <= 1.0:
        raise CLIError("epsilon must be in (0, 1]")
    if not 0.0 <= float(merged["zeta"]) <= 1.0:
        raise CLIError("zeta must be in [0, 1]")
    if not 0.0 <= float(merged["iou_threshold"]) <= 1.0:
        raise CLIError("iou-threshold must be in [0, 1]")
    if int(merged["seed"]) < 0:
        raise CLIError("seed must be >= 0")

    schedule = ScheduleConfig(
        epsilon=float(merged["epsilon"]),
        e0=float(merged["e0"]),
        e_milestones=tuple(int(v) for v in merged["e_milestones"]),
        p0=int(merged["p0"]),
        p_milestones=tuple(int(v) for v in merged["p_milestones"]),
    )
    return RunConfig(
        mode=mode,
        oracle=str(merged["oracle"]),
        endpoint=str(merged["endpoint"]),
        budget=int(merged["budget"]),
        seed=int(merged["seed"]),
        epsilon=float(merged["epsilon"]),
        zeta=float(merged["zeta"]),
        lam=float(merged["lambda"]),
        iou_threshold=float(merged["iou_threshold"]),
        dilation=None if merged["dilation"] is None else float(merged["dilation"]),
        workers=int(merged["workers"]),
        timeout=float(merged["timeout"]),
        schedule=schedule,
        images_dir=Path(args.images) if getattr(args, "images", None) else None,
        annotations=Path(args.annotations) if getattr(args, "annotations", None) else None,
        out_dir=Path(args.out) if getattr(args, "out", None) else None,
    )


@dataclass
class LoadedDataset:
    items: list[DatasetItem]
    num_classes: int
    errors: list[tuple[str, str]] = field(default_factory=list)


def load_dataset(images_dir: Path, annotations_path: Path) -> LoadedDataset:
    """Read PNGs plus the annotation file; bad entries are recorded, not fatal.

    Items come back in file-name order. Images without annotations, annotation
    entries without image files, unreadable images, and out-of-range labels
    are each recorded as (name, reason) and skipped.
    """
    try:
        raw = json.loads(Path(annotations_path).read_text())
    except OSError as exc:
        raise CLIError(f"cannot read annotations: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"malformed annotation JSON: {exc}") from exc
    if (
        not isinstance(raw, dict)
        or "num_classes" not in raw
        or "images" not in raw
        or not isinstance(raw["images"], dict)
    ):
        raise CLIError(
            'annotations must look like {"num_classes": Y, "images": {...}}'
        )
    num_classes = raw["num_classes"]
    if not isinstance(num_classes, int) or num_classes < 1:
        raise CLIError(f"bad num_classes in annotations: {num_classes!r}")
    by_name = raw["images"]

    errors: list[tuple[str, str]] = []
    items: list[DatasetItem] = []
    files = sorted(p.name for p in Path(images_dir).glob("*.png"))
    for name in files:
        if name not in by_name:
            errors.append((name, "no annotation entry"))
            continue
        try:
            image = load_image(Path(images_dir) / name)
        except Exception as exc:
            errors.append((name, f"unreadable image: {exc}"))
            continue
        try:
            gts = []
            for entry in by_name[name]:
                label = entry["label"]
                if not isinstance(label, int) or label < 0:
                    raise ValueError(f"bad label {label!r}")
                if label >= num_classes:
                    raise ValueError(
                        f"label {label} >= num_classes {num_classes}"
                    )
                x1, y1, x2, y2 = (float(v) for v in entry["box"])
                gts.append(
                    GroundTruthObject(box=Box(x1, y1, x2, y2), label=label)
                )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append((name, f"bad annotation: {exc}"))
            continue
        items.append(DatasetItem(name=name, image=image, gts=tuple(gts)))
    for name in sorted(by_name):
        if name not in set(files):
            errors.append((name, "image file missing"))
    return LoadedDataset(items=items, num_classes=num_classes, errors=errors)


def build_oracle(cfg: RunConfig) -> DetectorOracle:
    if cfg.oracle == "toy":
        return ToyDetector()
    return RemoteDetector(cfg.endpoint, timeout=cfg.timeout)


def _float_or_none(v):
    return None if v is None else float(v)


def _write_report(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _require_io(cfg: RunConfig, need_out: bool = True) -> None:
    if cfg.images_dir is None or cfg.annotations is None:
        raise CLIError("--images and --annotations are required")
    if not cfg.images_dir.is_dir():
        raise CLIError(f"images dir not found: {cfg.images_dir}")
    if not cfg.annotations.is_file():
        raise CLIError(f"annotations file not found: {cfg.annotations}")
    if need_out and cfg.out_dir is None:
        raise CLIError("--out is required")


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    _require_io(cfg)
    dataset = load_dataset(cfg.images_dir, cfg.annotations)
    if not dataset.items:
        raise CLIError("no usable images in the dataset")
    oracle = build_oracle(cfg)
    info = oracle.metadata()
    if dataset.num_classes != info.num_classes:
        raise CLIError(
            f"annotations declare {dataset.num_classes} classes but the "
            f"oracle reports {info.num_classes}"
        )

    attack_cfg = AttackConfig(
        budget=cfg.budget,
        objective=ObjectiveConfig(
            num_classes=info.num_classes,
            zeta=cfg.zeta,
            lam=cfg.lam,
            iou_threshold=cfg.iou_threshold,
        ),
        schedule=cfg.schedule,
        dilation=cfg.dilation,
    )
    results = run_batch(
        dataset.items,
        oracle,
        cfg.mode,
        attack_cfg,
        master_seed=cfg.seed,
        workers=cfg.workers,
    )

    out = cfg.out_dir
    (out / "adv").mkdir(parents=True, exist_ok=True)
    (out / "delta").mkdir(parents=True, exist_ok=True)
    (out / "trace").mkdir(parents=True, exist_ok=True)

    image_rows = []
    ok_results: list[AttackResult] = []
    ok_items: list[DatasetItem] = []
    for item, res in zip(dataset.items, results):
        row: dict[str, Any] = {"name": res.name}
        if res.error is not None:
            row["error"] = res.error
            image_rows.append(row)
            continue
        delta = res.state.best_perturbation
        linf = float(np.abs(delta).max())
        save_image(out / "adv" / res.name, res.image)
        save_image(out / "delta" / res.name, encode_delta(delta, cfg.epsilon))
        trace_payload = {
            "name": res.name,
            "succeeded": res.succeeded,
            "queries_used": res.queries_used,
            "best_objective": res.best_objective,
            "linf": linf,
            "trace": [[q, v] for q, v in res.state.trace],
        }
        stem = Path(res.name).stem
        _write_report(out / "trace" / f"{stem}.json", trace_payload)
        row.update(
            {
                "succeeded": res.succeeded,
                "queries_used": res.queries_used,
                "best_objective": res.best_objective,
                "linf": linf,
            }
        )
        image_rows.append(row)
        ok_results.append(res)
        ok_items.append(item)

    if not ok_results:
        raise CLIError("every image failed; see report for details")
    report = evaluate(
        [r.final_detections for r in ok_results],
        [it.gts for it in ok_items],
        info.num_classes,
        queries=[r.queries_used for r in ok_results],
    )
    n_ok = len(ok_results)
    payload = {
        "config": cfg.report_dict(),
        "dataset_errors": [list(e) for e in dataset.errors],
        "metrics": report.to_dict(),
        "mean_final_objective": sum(r.best_objective for r in ok_results) / n_ok,
        "success_rate": sum(1 for r in ok_results if r.succeeded) / n_ok,
        "images": image_rows,
    }
    _write_report(out / "report.json", payload)
    print(
        f"attacked {n_ok}/{len(results)} images | "
        f"success {payload['success_rate']:.2f} | "
        f"AQ {report.AQ:.1f} | mAP50 {_fmt(report.mAP50)}"
    )
    return 0


def _fmt(v: Optional[float]) -> str:
    return "n/a" if v is None else f"{v:.3f}"


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    _require_io(cfg)
    dataset = load_dataset(cfg.images_dir, cfg.annotations)
    if not dataset.items:
        raise CLIError("no usable images in the dataset")
    oracle = build_oracle(cfg)
    info = oracle.metadata()
    if dataset.num_classes != info.num_classes:
        raise CLIError(
            f"annotations declare {dataset.num_classes} classes but the "
            f"oracle reports {info.num_classes}"
        )
    dets = [oracle.detect(item.image) for item in dataset.items]
    report = evaluate(
        dets, [it.gts for it in dataset.items], info.num_classes
    )
    payload = {
        "config": cfg.report_dict(),
        "dataset_errors": [list(e) for e in dataset.errors],
        "metrics": report.to_dict(),
        "images": [
            {"name": it.name, "detections": len(d)}
            for it, d in zip(dataset.items, dets)
        ],
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_report(cfg.out_dir / "report.json", payload)
    print(f"evaluated {len(dataset.items)} images | mAP50 {_fmt(report.mAP50)}")
    return 0


def cmd_serve_toy(args: argparse.Namespace) -> int:
    from .server import serve_toy

    print(f"toy detector listening on http://{args.host}:{args.port}")
    serve_toy(host=args.host, port=args.port)
    return 0


def cmd_make_dataset(args: argparse.Namespace) -> int:
    from .datasets import make_suite, write_suite

    items = make_suite(args.count, args.seed, objects_per_image=args.objects)
    ann = write_suite(args.out, items)
    print(f"wrote {len(items)} scenes under {args.out} (annotations: {ann})")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .reporting import render_run_report

    written = render_run_report(Path(args.run_dir))
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rectflip",
        description="Query-efficient black-box attacks on detection oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_attack_knobs: bool) -> None:
        p.add_argument("--images", help="directory of PNG images")
        p.add_argument("--annotations", help="annotation JSON file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--oracle", choices=["toy", "http"])
        p.add_argument("--endpoint", help="detector service base URL")
        p.add_argument("--timeout", type=float, help="HTTP timeout seconds")
        if with_attack_knobs:
            p.add_argument("--mode", choices=[m.value for m in AttackMode])
            p.add_argument("--budget", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--epsilon", type=float)
            p.add_argument("--zeta", type=float)
            p.add_argument("--lambda", dest="lam", type=float)
            p.add_argument("--iou-threshold", dest="iou_threshold", type=float)
            p.add_argument("--dilation", type=float)
            p.add_argument("--workers", type=int)
            p.add_argument("--e0", type=float)
            p.add_argument("--e-milestones", dest="e_milestones")
            p.add_argument("--p0", type=int)
            p.add_argument("--p-milestones", dest="p_milestones")

    p_attack = sub.add_parser("attack", help="run the black-box attack")
    add_common(p_attack, with_attack_knobs=True)
    p_attack.set_defaults(func=cmd_attack)

    p_eval = sub.add_parser("eval", help="clean-image metrics only")
    add_common(p_eval, with_attack_knobs=False)
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve-toy", help="serve the toy detector")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8700)
    p_serve.set_defaults(func=cmd_serve_toy)

    p_make = sub.add_parser("make-dataset", help="generate the synthetic suite")
    p_make.add_argument("--out", required=True)
    p_make.add_argument("--count", type=int, default=20)
    p_make.add_argument("--seed", type=int, default=0)
    p_make.add_argument("--objects", type=int, default=3)
    p_make.set_defaults(func=cmd_make_dataset)

    p_report = sub.add_parser(
        "report", help="render figures and a CSV summary from a run directory"
    )
    p_report.add_argument("run_dir", help="directory written by `attack`")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
