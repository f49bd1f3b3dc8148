"""Predictor wrapping the forward-only network stack.

The model runs at its own working resolution (native by default, which
must be divisible by 32 and the patch size; otherwise pass `resolution`):
inputs are resized in, clicks rescaled, and the probability map is resized
back out. Backbone features come from the seeded in-process stub unless a
feature archive directory is given.
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from ..dataset import Sample
from ..errors import PredictorError
from ..masks import BinaryMask, Click, assemble_interaction
from ..nn import ArchiveFeatureProvider, InteractiveSegmenter, ModelConfig
from .base import Predictor, PredictRequest


def _resize_raster(array: np.ndarray, size: tuple[int, int], mode: str) -> np.ndarray:
    if array.shape[:2] == size:
        return array.astype(np.float32)
    tensor = torch.from_numpy(np.ascontiguousarray(array, dtype=np.float32))
    tensor = tensor.permute(2, 0, 1).unsqueeze(0) if array.ndim == 3 else tensor[None, None]
    kwargs = {} if mode == "nearest" else {"align_corners": False}
    out = F.interpolate(tensor, size=size, mode=mode, **kwargs)
    out = out.squeeze(0)
    return (out.permute(1, 2, 0) if array.ndim == 3 else out[0]).numpy()


class NeuralPredictor(Predictor):
    name = "neural"

    def __init__(
        self,
        seed: int = 0,
        cfg: ModelConfig | None = None,
        resolution: int | None = None,
        features_dir: str | None = None,
        disk_radius: float = 5.0,
    ):
        super().__init__()
        self.seed = seed
        self.cfg = cfg or ModelConfig()
        self.resolution = resolution
        self.disk_radius = disk_radius
        self._provider = ArchiveFeatureProvider(features_dir) if features_dir else None
        self._model: InteractiveSegmenter | None = None
        self._channels: tuple[int, ...] | None = None
        self._work_hw: tuple[int, int] | None = None
        self._native_hw: tuple[int, int] | None = None

    @property
    def model(self) -> InteractiveSegmenter:
        if self._model is None:
            raise PredictorError("neural: predict before prepare")
        return self._model

    def _prepare(self, sample: Sample):
        channels = tuple(sample.modalities[name].shape[2] for name in sorted(sample.modalities))
        if self._model is None:
            # Weights depend on the modality set, so the stack is built on
            # first use and must see the same modalities afterwards.
            self._channels = channels
            self._model = InteractiveSegmenter(
                channels, self.cfg, self.seed, feature_provider=self._provider
            )
        elif channels != self._channels:
            raise PredictorError(
                f"neural: modality channels changed from {self._channels} to {channels}"
            )

        self._native_hw = (sample.height, sample.width)
        if self.resolution is not None:
            self._work_hw = (self.resolution, self.resolution)
        else:
            self._work_hw = self._native_hw
        try:
            rgb = _resize_raster(sample.rgb, self._work_hw, "bilinear").clip(0.0, 255.0)
            modalities = {
                name: _resize_raster(sample.modalities[name], self._work_hw, "bilinear")
                for name in sample.modalities
            }
            self._model.prepare_features(rgb, modalities, sample.image_id)
        except ValueError as exc:
            raise PredictorError(f"neural: {exc}") from exc

    def _scale_click(self, click: Click) -> Click:
        nh, nw = self._native_hw
        wh, ww = self._work_hw
        row = min(int(click.row * wh / nh), wh - 1)
        col = min(int(click.col * ww / nw), ww - 1)
        return Click(row, col, click.positive)

    def _predict(self, request: PredictRequest) -> np.ndarray:
        wh, ww = self._work_hw
        clicks = [self._scale_click(c) for c in request.clicks]
        prev = _resize_raster(request.prev_mask.data.astype(np.float32), (wh, ww), "nearest")
        interaction = assemble_interaction(clicks, BinaryMask(prev >= 0.5), self.disk_radius)
        probabilities = self.model.predict_map(interaction)
        out = _resize_raster(probabilities, self._native_hw, "bilinear")
        return out.clip(0.0, 1.0)
