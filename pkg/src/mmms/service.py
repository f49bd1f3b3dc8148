"""HTTP annotation service hosting live multi-surface sessions.

Every session owns a prepared predictor, per-surface click logs, and the
joint label grid; clicks re-insert masks with the revisit rule so the
joint state always matches what the evaluation protocol would produce for
the same click sequence. Undo recomputes the session from its click log
(predictors are deterministic), so no snapshots are stored.
"""
from __future__ import annotations

import io
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import DatasetManifest, Sample, load_sample
from .errors import DatasetError, PredictorError
from .masks import (
    BinaryMask,
    Click,
    JointMask,
    iou,
    joint_extract,
    joint_insert_revisit,
    mask_to_json,
)
from .predictors import predictor_factory
from .predictors.base import PredictRequest
from .protocol import EvalConfig, average_iou

DEFAULT_SESSION_TTL = 1800.0


class SessionConfigBody(BaseModel):
    theta_iou: float = 80.0
    theta_avg: float = 70.0
    n_max: int = 20
    disk_radius: float = 5.0
    mask_threshold: float = 0.5


class CreateSessionBody(BaseModel):
    image_id: str
    predictor: str | None = None
    config: SessionConfigBody | None = None


class ClickBody(BaseModel):
    surface: int
    y: int
    x: int
    positive: bool = True


@dataclass
class Session:
    session_id: str
    sample: Sample
    predictor: object
    cfg: EvalConfig
    joint: JointMask
    clicks: dict[int, list[Click]]
    log: list[tuple[int, Click]] = field(default_factory=list)
    current_surface: int = 1
    last_used: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def surface_count(self) -> int:
        return self.sample.gt_joint.surface_count

    def surface_iou(self, surface: int) -> float:
        return iou(joint_extract(self.joint, surface),
                   joint_extract(self.sample.gt_joint, surface))

    def locked(self, surface: int) -> bool:
        return len(self.clicks[surface]) >= self.cfg.n_max

    def failed(self, surface: int) -> bool:
        return self.locked(surface) and self.surface_iou(surface) < self.cfg.theta_iou

    def apply_click(self, surface: int, click: Click) -> BinaryMask:
        """Run the predictor for one click and fold the mask into the joint grid."""
        self.clicks[surface].append(click)
        prev = joint_extract(self.joint, surface)
        try:
            response = self.predictor.predict(
                PredictRequest(tuple(self.clicks[surface]), prev, surface,
                               self.sample.image_id)
            )
        except PredictorError:
            self.clicks[surface].pop()
            raise
        mask = BinaryMask(response.probabilities >= self.cfg.mask_threshold)
        self.joint = joint_insert_revisit(self.joint, surface, mask)
        return mask

    def replay(self):
        """Rebuild joint state and click lists from the log."""
        entries = list(self.log)
        self.log = []
        self.joint = JointMask.zeros(self.sample.height, self.sample.width,
                                     self.surface_count)
        self.clicks = {k: [] for k in range(1, self.surface_count + 1)}
        for surface, click in entries:
            self.apply_click(surface, click)
            self.log.append((surface, click))

    def snapshot(self) -> dict:
        surfaces = []
        for k in range(1, self.surface_count + 1):
            surfaces.append(
                {
                    "id": k,
                    "clicks_used": len(self.clicks[k]),
                    "locked": self.locked(k),
                    "iou": self.surface_iou(k),
                    "mask": mask_to_json(joint_extract(self.joint, k)),
                    "clicks": [
                        {"y": c.row, "x": c.col, "positive": c.positive}
                        for c in self.clicks[k]
                    ],
                }
            )
        return {
            "session_id": self.session_id,
            "image_id": self.sample.image_id,
            "height": self.sample.height,
            "width": self.sample.width,
            "surface_count": self.surface_count,
            "current_surface": self.current_surface,
            "avg_iou": average_iou(self.joint, self.sample.gt_joint),
            "theta_iou": self.cfg.theta_iou,
            "theta_avg": self.cfg.theta_avg,
            "n_max": self.cfg.n_max,
            "surfaces": surfaces,
        }


def create_app(
    manifest: DatasetManifest,
    predictor_spec: str = "classical",
    default_cfg: EvalConfig | None = None,
    static_dir=None,
    session_ttl: float = DEFAULT_SESSION_TTL,
    resolution: int | None = None,
    features_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="multi-surface annotation service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    base_cfg = default_cfg or EvalConfig(theta_iou=80.0, theta_avg=70.0)

    def purge_idle():
        deadline = time.monotonic() - session_ttl
        with registry_lock:
            for session_id in [s for s, sess in sessions.items() if sess.last_used < deadline]:
                sessions.pop(session_id)

    def get_session(session_id: str) -> Session:
        purge_idle()
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        session.last_used = time.monotonic()
        return session

    @app.get("/api/datasets")
    def list_datasets():
        return {
            "root": str(manifest.root),
            "images": list(manifest.images),
            "modalities": [
                {"name": m.name, "channels": m.channels} for m in manifest.modalities
            ],
        }

    @app.get("/api/images/{image_id}/rgb.png")
    def image_rgb(image_id: str):
        path = manifest.root / "rgb" / f"{image_id}.png"
        if not path.is_file():
            raise HTTPException(404, f"no rgb raster for {image_id!r}")
        return Response(path.read_bytes(), media_type="image/png")

    @app.get("/api/images/{image_id}/gt.png")
    def image_gt(image_id: str):
        from PIL import Image

        try:
            sample = load_sample(manifest, image_id)
        except DatasetError as exc:
            raise HTTPException(404, str(exc))
        palette = np.array(
            [(0, 0, 0), (231, 76, 60), (52, 152, 219), (46, 204, 113), (241, 196, 15),
             (155, 89, 182), (26, 188, 156), (230, 126, 34), (149, 165, 166)],
            np.uint8,
        )
        labels = sample.gt_joint.labels
        indexed = np.where(labels == 0, 0, (labels - 1) % (len(palette) - 1) + 1)
        raster = palette[indexed]
        buffer = io.BytesIO()
        Image.fromarray(raster, mode="RGB").save(buffer, format="PNG")
        return Response(buffer.getvalue(), media_type="image/png")

    @app.get("/api/images/{image_id}/modality/{name}.png")
    def image_modality(image_id: str, name: str):
        from PIL import Image

        if name not in manifest.modality_names():
            raise HTTPException(404, f"unknown modality {name!r}")
        try:
            sample = load_sample(manifest, image_id)
        except DatasetError as exc:
            raise HTTPException(404, str(exc))
        values = sample.modalities[name][:, :, 0]
        raster = (values * 255).clip(0, 255).astype(np.uint8)
        buffer = io.BytesIO()
        Image.fromarray(raster, mode="L").save(buffer, format="PNG")
        return Response(buffer.getvalue(), media_type="image/png")

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        try:
            sample = load_sample(manifest, body.image_id)
        except DatasetError as exc:
            raise HTTPException(404, str(exc))
        if sample.gt_joint.surface_count < 1:
            raise HTTPException(422, f"image {body.image_id!r} has no annotated surfaces")
        cfg = base_cfg
        if body.config is not None:
            cfg = EvalConfig(**body.config.model_dump())
        spec = body.predictor or predictor_spec
        factory = predictor_factory(
            spec, resolution=resolution, features_dir=features_dir,
            disk_radius=cfg.disk_radius,
        )
        predictor = factory()
        try:
            predictor.prepare(sample)
        except PredictorError as exc:
            raise HTTPException(502, f"predictor failed to prepare: {exc}")
        session = Session(
            session_id=uuid.uuid4().hex,
            sample=sample,
            predictor=predictor,
            cfg=cfg,
            joint=JointMask.zeros(sample.height, sample.width, sample.gt_joint.surface_count),
            clicks={k: [] for k in range(1, sample.gt_joint.surface_count + 1)},
        )
        with registry_lock:
            sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "surfaces": list(range(1, session.surface_count + 1)),
            "height": sample.height,
            "width": sample.width,
        }

    @app.post("/api/sessions/{session_id}/clicks")
    def post_click(session_id: str, body: ClickBody):
        session = get_session(session_id)
        with session.lock:
            if not 1 <= body.surface <= session.surface_count:
                raise HTTPException(422, f"surface {body.surface} out of range")
            if not (0 <= body.y < session.sample.height and 0 <= body.x < session.sample.width):
                raise HTTPException(422, f"click ({body.y}, {body.x}) out of bounds")
            if session.locked(body.surface):
                raise HTTPException(409, f"surface {body.surface} used its click budget")
            before = session.joint.labels
            click = Click(body.y, body.x, body.positive)
            try:
                mask = session.apply_click(body.surface, click)
            except PredictorError as exc:
                raise HTTPException(502, f"predictor failed: {exc}")
            session.log.append((body.surface, click))
            session.current_surface = body.surface
            changed = BinaryMask(before != session.joint.labels)
            return {
                "mask": mask_to_json(mask),
                "changed": mask_to_json(changed),
                "iou": session.surface_iou(body.surface),
                "avg_iou": average_iou(session.joint, session.sample.gt_joint),
                "clicks_used": len(session.clicks[body.surface]),
            }

    @app.post("/api/sessions/{session_id}/undo")
    def undo_click(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if not session.log:
                raise HTTPException(409, "nothing to undo")
            session.log.pop()
            try:
                session.replay()
            except PredictorError as exc:
                raise HTTPException(502, f"predictor failed during replay: {exc}")
            return session.snapshot()

    @app.post("/api/sessions/{session_id}/select-worst")
    def select_worst(session_id: str):
        session = get_session(session_id)
        with session.lock:
            candidates = [
                k for k in range(1, session.surface_count + 1) if not session.failed(k)
            ]
            if not candidates:
                raise HTTPException(409, "every surface has failed")
            worst = min(candidates, key=lambda k: (session.surface_iou(k), k))
            session.current_surface = worst
            return {"surface": worst, "iou": session.surface_iou(worst)}

    @app.get("/api/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.snapshot()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
