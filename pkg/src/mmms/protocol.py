"""Single-surface and multi-surface evaluation loops.

The single-surface loop simulates corrective clicks until the prediction
reaches theta_iou or the per-surface budget runs out, in which case the
budget itself is the reported (surrogate) click count.

The multi-surface loop first annotates every surface in order, pasting
each finished mask onto a joint label grid where later surfaces override
earlier ones. While the average IoU over all surfaces stays below
theta_avg, the worst non-failed surface is revisited: its click count and
click list carry over, the previous mask is its current extraction from
the joint grid, and the corrected mask is re-inserted with the rule that
also clears dropped pixels to background. A surface whose budget runs out
is marked failed and excluded from further selection, so the loop always
terminates within surface_count * n_max clicks.
"""
from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .clicksim import next_click
from .dataset import DatasetManifest, MANIFEST_NAME, load_sample
from .errors import ConfigError, PredictorError
from .masks import (
    BinaryMask,
    Click,
    JointMask,
    iou,
    joint_extract,
    joint_insert_classical,
    joint_insert_revisit,
)
from .predictors.base import Predictor, PredictRequest
from .report import EvalReport, compute_timing

STANDARD_THRESHOLDS = (60.0, 70.0, 80.0, 90.0)


@dataclass(frozen=True)
class EvalConfig:
    theta_iou: float
    theta_avg: float = 0.0
    n_max: int = 20
    disk_radius: float = 5.0
    mask_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.theta_iou <= 100.0:
            raise ConfigError(f"theta_iou must be in (0, 100], got {self.theta_iou}")
        if not 0.0 <= self.theta_avg <= 100.0:
            raise ConfigError(f"theta_avg must be in [0, 100], got {self.theta_avg}")
        if self.theta_iou < self.theta_avg:
            raise ConfigError(
                f"theta_iou ({self.theta_iou}) must be >= theta_avg ({self.theta_avg}); "
                "otherwise per-surface improvements cannot lift the average"
            )
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")
        if not 0.0 < self.mask_threshold < 1.0:
            raise ConfigError(f"mask_threshold must be in (0, 1), got {self.mask_threshold}")

    def fingerprint(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass(frozen=True)
class SurfaceRunResult:
    surface: int
    clicks_used: int
    iou_trace: tuple[float, ...]
    succeeded: bool
    clicks: tuple[Click, ...]
    final_mask: BinaryMask
    click_seconds: float = 0.0
    image_id: str = ""


@dataclass(frozen=True)
class MultiSurfaceRunResult:
    image_id: str
    per_surface_clicks: tuple[int, ...]
    per_surface_failed: tuple[bool, ...]
    revisit_count: int
    final_joint: JointMask
    final_avg_iou: float
    click_seconds: float = 0.0

    @property
    def total_clicks(self) -> int:
        return sum(self.per_surface_clicks)


class _ClickLoop:
    """Mutable per-surface loop state shared by the two protocols."""

    def __init__(self, predictor: Predictor, gt: BinaryMask, cfg: EvalConfig,
                 surface: int, image_id: str):
        self.predictor = predictor
        self.gt = gt
        self.cfg = cfg
        self.surface = surface
        self.image_id = image_id
        self.clicks: list[Click] = []
        self.trace: list[float] = []
        self.click_seconds = 0.0

    def improve(self, prev: BinaryMask) -> tuple[BinaryMask, bool]:
        """Click until IoU >= theta_iou or the accumulated budget is spent."""
        cfg = self.cfg
        current = prev
        value = iou(current, self.gt)
        while value < cfg.theta_iou and len(self.clicks) < cfg.n_max:
            click = next_click(current, self.gt)
            assert click is not None  # value < theta_iou <= 100 implies an error pixel
            self.clicks.append(click)
            try:
                response = self.predictor.predict(
                    PredictRequest(tuple(self.clicks), current, self.surface, self.image_id)
                )
            except PredictorError as exc:
                raise PredictorError(
                    f"image {self.image_id!r} surface {self.surface} "
                    f"click {len(self.clicks)}: {exc}"
                ) from exc
            self.click_seconds += response.click_seconds
            current = BinaryMask(response.probabilities >= cfg.mask_threshold)
            value = iou(current, self.gt)
            self.trace.append(value)
        return current, value >= cfg.theta_iou


def run_single_surface(
    predictor: Predictor,
    surface_gt: BinaryMask,
    cfg: EvalConfig,
    surface: int = 1,
    image_id: str = "",
) -> SurfaceRunResult:
    """Standard interactive loop for one surface, starting from an empty mask."""
    if surface_gt.is_empty():
        raise ValueError(f"ground truth for surface {surface} is empty")
    loop = _ClickLoop(predictor, surface_gt, cfg, surface, image_id)
    mask, succeeded = loop.improve(BinaryMask.zeros(surface_gt.height, surface_gt.width))
    return SurfaceRunResult(
        surface=surface,
        clicks_used=len(loop.clicks),
        iou_trace=tuple(loop.trace),
        succeeded=succeeded,
        clicks=tuple(loop.clicks),
        final_mask=mask,
        click_seconds=loop.click_seconds,
        image_id=image_id,
    )


def average_iou(joint: JointMask, gt_joint: JointMask) -> float:
    """Unweighted mean of per-surface IoUs between the two label grids."""
    if joint.surface_count != gt_joint.surface_count:
        raise ValueError(
            f"surface count mismatch: {joint.surface_count} vs {gt_joint.surface_count}"
        )
    values = [
        iou(joint_extract(joint, k), joint_extract(gt_joint, k))
        for k in range(1, joint.surface_count + 1)
    ]
    return float(np.mean(values))


def run_multi_surface(
    predictor: Predictor,
    gt_joint: JointMask,
    cfg: EvalConfig,
    image_id: str = "",
) -> MultiSurfaceRunResult:
    """Annotate all surfaces, then revisit the worst until the average holds."""
    count = gt_joint.surface_count
    if count < 1:
        raise ValueError("joint ground truth has no surfaces")
    gts = {k: joint_extract(gt_joint, k) for k in range(1, count + 1)}
    for k, gt in gts.items():
        if gt.is_empty():
            raise ValueError(f"ground truth for surface {k} is empty")

    joint = JointMask.zeros(gt_joint.height, gt_joint.width, count)
    loops: dict[int, _ClickLoop] = {}
    failed: dict[int, bool] = {}

    # Phase 1: sequential annotation, byte-identical to the single-surface loop.
    for k in range(1, count + 1):
        loop = _ClickLoop(predictor, gts[k], cfg, k, image_id)
        loops[k] = loop
        mask, ok = loop.improve(BinaryMask.zeros(gt_joint.height, gt_joint.width))
        joint = joint_insert_classical(joint, k, mask)
        failed[k] = not ok

    # Phase 2: selection and improvement of the worst surface.
    revisits = 0
    while True:
        ious = {k: iou(joint_extract(joint, k), gts[k]) for k in range(1, count + 1)}
        if float(np.mean(list(ious.values()))) >= cfg.theta_avg:
            break
        candidates = [k for k in range(1, count + 1) if not failed[k]]
        if not candidates:
            break
        worst = min(candidates, key=lambda k: (ious[k], k))
        if ious[worst] >= cfg.theta_iou:
            break  # every surface still below theta_iou has exhausted its budget
        revisits += 1
        mask, ok = loops[worst].improve(joint_extract(joint, worst))
        joint = joint_insert_revisit(joint, worst, mask)
        if not ok:
            failed[worst] = True

    return MultiSurfaceRunResult(
        image_id=image_id,
        per_surface_clicks=tuple(len(loops[k].clicks) for k in range(1, count + 1)),
        per_surface_failed=tuple(failed[k] for k in range(1, count + 1)),
        revisit_count=revisits,
        final_joint=joint,
        final_avg_iou=average_iou(joint, gt_joint),
        click_seconds=sum(loops[k].click_seconds for k in range(1, count + 1)),
    )


def _clicks_at_threshold(result: SurfaceRunResult, threshold: float, n_max: int) -> int:
    """First click index whose IoU reached the threshold, else the budget."""
    for index, value in enumerate(result.iou_trace, start=1):
        if value >= threshold:
            return index
    return n_max


def aggregate(
    results: Sequence[SurfaceRunResult] | Sequence[MultiSurfaceRunResult],
    cfg: EvalConfig,
    *,
    images: int,
    fingerprints: dict[str, str],
    timing: dict[str, float] | None = None,
    errors: dict[str, str] | None = None,
) -> EvalReport:
    """Fold per-run results into the dataset-level metric report."""
    if not results:
        raise ValueError("no results to aggregate")
    if isinstance(results[0], MultiSurfaceRunResult):
        per_surface = [c for r in results for c in r.per_surface_clicks]
        failures = sum(f for r in results for f in r.per_surface_failed)
        pair = f"({cfg.theta_iou:g},{cfg.theta_avg:g})"
        metrics = {
            f"NoCMS@{pair}": float(np.mean(per_surface)),
            f"FRMS@{pair}": 100.0 * failures / len(per_surface),
        }
        return EvalReport(
            mode="multi",
            theta_iou=cfg.theta_iou,
            theta_avg=cfg.theta_avg,
            n_max=cfg.n_max,
            metrics=metrics,
            images=images,
            surfaces_total=len(per_surface),
            surfaces_failed=failures,
            revisit_total=sum(r.revisit_count for r in results),
            fingerprints=fingerprints,
            timing=timing or {},
            errors=errors or {},
        )

    # Single-surface mode: lower standard thresholds come for free from the
    # recorded traces, since the simulated click sequence does not depend on
    # theta until the loop stops.
    metrics = {f"NoC@{cfg.theta_iou:g}": float(np.mean([r.clicks_used for r in results]))}
    for threshold in STANDARD_THRESHOLDS:
        if threshold < cfg.theta_iou:
            values = [_clicks_at_threshold(r, threshold, cfg.n_max) for r in results]
            metrics[f"NoC@{threshold:g}"] = float(np.mean(values))
    failures = sum(not r.succeeded for r in results)
    return EvalReport(
        mode="single",
        theta_iou=cfg.theta_iou,
        theta_avg=None,
        n_max=cfg.n_max,
        metrics=metrics,
        images=images,
        surfaces_total=len(results),
        surfaces_failed=failures,
        fingerprints=fingerprints,
        timing=timing or {},
        errors=errors or {},
    )


def dataset_fingerprint(manifest: DatasetManifest) -> str:
    digest = hashlib.sha256((manifest.root / MANIFEST_NAME).read_bytes())
    return digest.hexdigest()


def evaluate_dataset(
    manifest: DatasetManifest,
    predictor_factory: Callable[[], Predictor],
    cfg: EvalConfig,
    mode: str = "single",
    workers: int = 1,
    predictor_label: str = "",
) -> EvalReport:
    """Run the chosen protocol over every image and aggregate one report.

    Images are independent, so they can be distributed over a worker pool;
    each worker owns a private predictor instance and processes one image
    at a time (runs are internally sequential). A predictor error fails
    that image (all of its surfaces count as n_max-click failures) without
    stopping the evaluation.
    """
    if mode not in ("single", "multi"):
        raise ConfigError(f"unknown evaluation mode {mode!r}")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if not manifest.images:
        raise ValueError("dataset has no images")

    local = threading.local()
    created: list[Predictor] = []
    created_lock = threading.Lock()

    def get_predictor() -> Predictor:
        if not hasattr(local, "predictor"):
            predictor = predictor_factory()
            with created_lock:
                created.append(predictor)
            local.predictor = predictor
        return local.predictor

    def run_image(image_id: str):
        sample = load_sample(manifest, image_id)
        predictor = get_predictor()
        count = sample.gt_joint.surface_count
        try:
            predictor.prepare(sample)
            feature_seconds = predictor.feature_seconds
            if mode == "single":
                results = [
                    run_single_surface(
                        predictor, joint_extract(sample.gt_joint, k), cfg, k, image_id
                    )
                    for k in range(1, count + 1)
                ]
            else:
                results = [run_multi_surface(predictor, sample.gt_joint, cfg, image_id)]
            return results, feature_seconds, None
        except PredictorError as exc:
            if mode == "single":
                results = [
                    SurfaceRunResult(
                        surface=k, clicks_used=cfg.n_max, iou_trace=(), succeeded=False,
                        clicks=(), final_mask=BinaryMask.zeros(sample.height, sample.width),
                        image_id=image_id,
                    )
                    for k in range(1, count + 1)
                ]
            else:
                results = [
                    MultiSurfaceRunResult(
                        image_id=image_id,
                        per_surface_clicks=(cfg.n_max,) * count,
                        per_surface_failed=(True,) * count,
                        revisit_count=0,
                        final_joint=JointMask.zeros(sample.height, sample.width, count),
                        final_avg_iou=0.0,
                    )
                ]
            return results, predictor.feature_seconds, str(exc)

    outcomes: dict[str, tuple] = {}
    try:
        if workers == 1:
            for image_id in manifest.images:
                outcomes[image_id] = run_image(image_id)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    image_id: pool.submit(run_image, image_id) for image_id in manifest.images
                }
                for image_id, future in futures.items():
                    outcomes[image_id] = future.result()
    finally:
        for predictor in created:
            predictor.close()

    all_results = []
    errors: dict[str, str] = {}
    feature_seconds = 0.0
    click_seconds = 0.0
    for image_id in manifest.images:  # manifest order keeps aggregation deterministic
        results, feat, error = outcomes[image_id]
        all_results.extend(results)
        feature_seconds += feat
        click_seconds += sum(r.click_seconds for r in results)
        if error is not None:
            errors[image_id] = error

    if mode == "single":
        total_clicks = sum(len(r.clicks) for r in all_results)
    else:
        total_clicks = sum(r.total_clicks for r in all_results)
    fingerprints = {
        "dataset": dataset_fingerprint(manifest),
        "predictor": predictor_label or (created[0].name if created else "custom"),
        "config": cfg.fingerprint(),
    }
    return aggregate(
        all_results,
        cfg,
        images=len(manifest.images),
        fingerprints=fingerprints,
        timing=compute_timing(total_clicks, feature_seconds, click_seconds),
        errors=errors,
    )
