"""Query-efficient black-box attacks on object-detection oracles."""

from .geometry import Box, area, iou
from .metrics import EvalReport, average_precision, evaluate
from .objective import (
    Detection,
    GroundTruthObject,
    ObjectiveConfig,
    attack_succeeded,
    objective_h,
)
from .oracle import (
    DetectorOracle,
    OracleInfo,
    ToyDetector,
    ToyDetectorConfig,
    nms,
    toy_detect,
)
from .perturbation import (
    Patch,
    ScheduleConfig,
    apply_and_project,
    flip_half,
    parallel_at,
    sample_square,
    side_at,
)
from .prior import (
    SearchMask,
    default_dilation,
    mask_from_boxes,
    mask_from_file,
    sample_origin,
)
from .remote import RemoteDetector, TransportError
from .search import (
    AttackAborted,
    AttackConfig,
    AttackMode,
    AttackResult,
    AttackState,
    DatasetItem,
    run_attack,
    run_batch,
)

__version__ = "0.1.0"

__all__ = [
    "AttackAborted",
    "AttackConfig",
    "AttackMode",
    "AttackResult",
    "AttackState",
    "Box",
    "DatasetItem",
    "Detection",
    "DetectorOracle",
    "EvalReport",
    "GroundTruthObject",
    "ObjectiveConfig",
    "OracleInfo",
    "Patch",
    "RemoteDetector",
    "ScheduleConfig",
    "SearchMask",
    "ToyDetector",
    "ToyDetectorConfig",
    "TransportError",
    "apply_and_project",
    "area",
    "attack_succeeded",
    "average_precision",
    "default_dilation",
    "evaluate",
    "flip_half",
    "iou",
    "mask_from_boxes",
    "mask_from_file",
    "nms",
    "objective_h",
    "parallel_at",
    "run_attack",
    "run_batch",
    "sample_origin",
    "sample_square",
    "side_at",
    "toy_detect",
]
