"""Random-search attack loop against a detection oracle.

One candidate per query: stamp scheduled square patches (optionally
sign-split, optionally several at once) onto the incumbent perturbation,
ask the oracle, keep the candidate iff the objective strictly improves.
Patch origins are drawn from a prior mask built from the detector's own
boxes and refreshed whenever a candidate is accepted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .objective import (
    Detection,
    GroundTruthObject,
    ObjectiveConfig,
    attack_succeeded,
    objective_h,
)
from .oracle import DetectorOracle
from .perturbation import (
    Patch,
    ScheduleConfig,
    apply_and_project,
    at_origin,
    flip_half,
    parallel_at,
    sample_square,
    side_at,
)
from .prior import (
    SearchMask,
    default_dilation,
    full_mask,
    mask_from_boxes,
    sample_origin,
)


class AttackMode(str, Enum):
    SQUARE_SHAPED = "ss"
    SS_PRIOR = "ss-prior"
    SS_PRIOR_FLIP = "ss-prior-flip"
    SS_PRIOR_PARALLEL = "ss-prior-parallel"
    PRFA = "prfa"

    @property
    def uses_prior(self) -> bool:
        return self is not AttackMode.SQUARE_SHAPED

    @property
    def uses_flip(self) -> bool:
        return self in (AttackMode.SS_PRIOR_FLIP, AttackMode.PRFA)

    @property
    def uses_parallel(self) -> bool:
        return self in (AttackMode.SS_PRIOR_PARALLEL, AttackMode.PRFA)


@dataclass(frozen=True)
class AttackConfig:
    budget: int
    objective: ObjectiveConfig
    schedule: ScheduleConfig = ScheduleConfig()
    dilation: Optional[float] = None  # None -> 10% of sqrt(w*h)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")


@dataclass
class AttackState:
    """Mutable best-so-far view of one attack run."""

    best_perturbation: np.ndarray
    best_objective: float
    queries_used: int
    succeeded: bool
    trace: list[tuple[int, float]] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)


@dataclass
class AttackResult:
    name: str
    image: Optional[np.ndarray]
    final_detections: list[Detection]
    state: Optional[AttackState]
    wall_time: float
    error: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return bool(self.state and self.state.succeeded)

    @property
    def queries_used(self) -> int:
        return self.state.queries_used if self.state else 0

    @property
    def best_objective(self) -> Optional[float]:
        return self.state.best_objective if self.state else None


class AttackAborted(RuntimeError):
    """Oracle failure mid-attack; carries the partial state."""

    def __init__(self, message: str, state: AttackState):
        super().__init__(message)
        self.state = state


def _build_mask(
    mode: AttackMode,
    boxes: Sequence[Detection],
    dilation: float,
    width: int,
    height: int,
) -> SearchMask:
    if not mode.uses_prior:
        return full_mask(width, height)
    return mask_from_boxes([d.box for d in boxes], dilation, width, height)


def run_attack(
    image: np.ndarray,
    gts: Sequence[GroundTruthObject],
    oracle: DetectorOracle,
    mode: AttackMode,
    cfg: AttackConfig,
    rng: np.random.Generator,
    name: str = "",
) -> AttackResult:
    """Attack one image within cfg.budget oracle queries.

    Query 0 is the clean image; it establishes the starting detections,
    objective, and prior. Each following query evaluates one candidate and
    keeps it only on strict improvement. The loop ends at the budget or as
    soon as the success predicate holds.
    """
    t0 = time.perf_counter()
    h, w = image.shape[:2]
    eps = cfg.schedule.epsilon
    state = AttackState(
        best_perturbation=np.zeros_like(image),
        best_objective=float("inf"),
        queries_used=0,
        succeeded=False,
        counters={"flips": 0, "patches": 0, "mask_rebuilds": 0, "max_parallel": 0},
    )

    def oracle_detect(x: np.ndarray) -> list[Detection]:
        try:
            return oracle.detect(x)
        except Exception as exc:
            raise AttackAborted(f"oracle failed: {exc}", state) from exc

    if cfg.budget == 0:
        # Degenerate case: no counted queries at all. One free call reports
        # where the clean image already stands.
        dets = oracle_detect(image)
        state.succeeded = attack_succeeded(dets, gts, cfg.objective)
        state.best_objective = objective_h(dets, gts, cfg.objective)
        return AttackResult(
            name=name,
            image=image.copy(),
            final_detections=dets,
            state=state,
            wall_time=time.perf_counter() - t0,
        )

    best_dets = oracle_detect(image)
    state.queries_used = 1
    state.best_objective = objective_h(best_dets, gts, cfg.objective)
    state.succeeded = attack_succeeded(best_dets, gts, cfg.objective)
    state.trace.append((0, state.best_objective))

    dilation = (
        cfg.dilation if cfg.dilation is not None else default_dilation(w, h)
    )
    mask = _build_mask(mode, best_dets, dilation, w, h)
    state.counters["mask_rebuilds"] += 1

    while not state.succeeded and state.queries_used < cfg.budget:
        q = state.queries_used
        side = min(side_at(q, w, h, cfg.schedule), h, w)
        n_patches = parallel_at(q, cfg.schedule) if mode.uses_parallel else 1
        state.counters["max_parallel"] = max(
            state.counters["max_parallel"], n_patches
        )

        patches: list[Patch] = []
        for _ in range(n_patches):
            row, col = sample_origin(mask, side, rng)
            patch = at_origin(sample_square(rng, side, eps), row, col)
            if mode.uses_flip and side >= 2:
                patch = flip_half(patch, rng)
                state.counters["flips"] += 1
            patches.append(patch)
        state.counters["patches"] += len(patches)

        candidate, cand_delta = apply_and_project(
            image, state.best_perturbation, patches, eps
        )
        dets = oracle_detect(candidate)
        state.queries_used += 1
        cand_obj = objective_h(dets, gts, cfg.objective)

        if attack_succeeded(dets, gts, cfg.objective):
            # The goal outranks the surrogate objective: adopt the candidate
            # even if its score did not improve, but never let the recorded
            # best go back up.
            state.succeeded = True
            state.best_perturbation = cand_delta
            state.best_objective = min(state.best_objective, cand_obj)
            best_dets = dets
        elif cand_obj < state.best_objective:
            state.best_perturbation = cand_delta
            state.best_objective = cand_obj
            best_dets = dets
            mask = _build_mask(mode, best_dets, dilation, w, h)
            state.counters["mask_rebuilds"] += 1
        state.trace.append((q, state.best_objective))

    adversarial = np.clip(image + state.best_perturbation, 0.0, 1.0)
    return AttackResult(
        name=name,
        image=adversarial,
        final_detections=best_dets,
        state=state,
        wall_time=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class DatasetItem:
    name: str
    image: np.ndarray
    gts: tuple[GroundTruthObject, ...]


def run_batch(
    items: Sequence[DatasetItem],
    oracle: DetectorOracle,
    mode: AttackMode,
    cfg: AttackConfig,
    master_seed: int,
    workers: int = 1,
) -> list[AttackResult]:
    """Attack a dataset; results come back in input order.

    Every image gets an independent substream derived from (master_seed,
    image index), so the outcome is identical no matter how many workers
    run and an error in one image cannot poison another. Failures are
    recorded on that image's result and the batch continues.
    """

    def attack_one(idx: int) -> AttackResult:
        item = items[idx]
        rng = np.random.default_rng([master_seed, idx])
        try:
            return run_attack(
                item.image, item.gts, oracle, mode, cfg, rng, name=item.name
            )
        except AttackAborted as exc:
            return AttackResult(
                name=item.name,
                image=None,
                final_detections=[],
                state=exc.state,
                wall_time=0.0,
                error=str(exc),
            )
        except Exception as exc:  # pragma: no cover - defensive
            return AttackResult(
                name=item.name,
                image=None,
                final_detections=[],
                state=None,
                wall_time=0.0,
                error=f"{type(exc).__name__}: {exc}",
            )

    if workers <= 1 or len(items) <= 1:
        return [attack_one(i) for i in range(len(items))]

    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(attack_one, range(len(items))))
