"""Scripted oracle predictor, the reference fixture for metric tests.

Each (image, surface) pair carries an ordered list of masks; the call with
n accumulated clicks returns the n-th mask, and the last entry repeats
once the script runs out. Keying on the click count (not a hidden counter)
keeps the oracle a pure function of its request, so undo/replay paths see
identical responses.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset import Sample
from ..errors import PredictorError
from ..masks import BinaryMask, RleMask, rle_decode
from .base import Predictor, PredictRequest

Script = dict[int, list[BinaryMask]]  # surface id -> masks per successive call


class OraclePredictor(Predictor):
    name = "oracle"

    def __init__(self, scripts: dict[str, Script]):
        super().__init__()
        if not scripts:
            raise PredictorError("oracle script is empty")
        for image_id, script in scripts.items():
            for surface, masks in script.items():
                if not masks:
                    raise PredictorError(
                        f"oracle script for image {image_id!r} surface {surface} is empty"
                    )
        self.scripts = scripts

    @staticmethod
    def from_file(path: str | Path) -> "OraclePredictor":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise PredictorError(f"cannot read oracle script {path}: {exc}") from exc
        scripts: dict[str, Script] = {}
        for image_id, surfaces in raw.get("images", {}).items():
            scripts[image_id] = {
                int(surface): [rle_decode(RleMask.from_json(entry)) for entry in masks]
                for surface, masks in surfaces.items()
            }
        return OraclePredictor(scripts)

    def _prepare(self, sample: Sample):
        if sample.image_id not in self.scripts:
            raise PredictorError(f"oracle script has no entry for image {sample.image_id!r}")

    def _predict(self, request: PredictRequest) -> np.ndarray:
        script = self.scripts[self.sample.image_id]
        if request.surface not in script:
            raise PredictorError(
                f"oracle script for {self.sample.image_id!r} has no surface {request.surface}"
            )
        masks = script[request.surface]
        index = min(max(len(request.clicks), 1), len(masks)) - 1
        return masks[index].data.astype(np.float32)
