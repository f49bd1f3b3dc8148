"""Composed forward stack with the once-per-image / per-click split.

prepare_features runs backbone -> ParallelFPN -> MMFuser exactly once and
caches the mixed pyramid; predict_map only executes MSPatchEmbed and CSNet
per click. Call counters on every submodule make the split auditable.
"""
from __future__ import annotations

import numpy as np
import torch

from ..masks import InteractionTensor
from .backbone import StubBackboneProvider
from .config import ModelConfig, check_resolution
from .csnet import CSNet, MSPatchEmbed
from .fpn import ParallelFPN
from .fuser import MMFuser


def _freeze(module: torch.nn.Module) -> torch.nn.Module:
    module.eval()
    for parameter in module.parameters():
        parameter.requires_grad_(False)
    return module


class InteractiveSegmenter:
    def __init__(
        self,
        modality_channels: tuple[int, ...] = (),
        cfg: ModelConfig | None = None,
        seed: int = 0,
        feature_provider=None,
    ):
        self.cfg = cfg or ModelConfig()
        self.seed = seed
        torch.manual_seed(seed)
        self.fpn = _freeze(ParallelFPN(self.cfg.fpn))
        self.fuser = _freeze(
            MMFuser(tuple(modality_channels), self.cfg.embed_dims, self.cfg.heads,
                    self.cfg.encoder_depth)
        )
        self.patch_embed = _freeze(MSPatchEmbed(self.cfg.embed_dims))
        self.csnet = _freeze(
            CSNet(self.cfg.embed_dims, self.cfg.heads, self.cfg.encoder_depth, self.cfg.head_dim)
        )
        self.provider = feature_provider or StubBackboneProvider(seed, self.cfg.backbone)
        self._f_mix = None
        self._image_hw: tuple[int, int] | None = None

    @property
    def backbone_calls(self) -> int:
        return self.provider.calls

    @property
    def fpn_calls(self) -> int:
        return self.fpn.calls

    @property
    def fuser_calls(self) -> int:
        return self.fuser.calls

    @property
    def embed_calls(self) -> int:
        return self.patch_embed.calls

    @property
    def csnet_calls(self) -> int:
        return self.csnet.calls

    def prepare_features(
        self, rgb: np.ndarray, modalities: dict[str, np.ndarray] | None = None, image_id: str = ""
    ):
        """Cache the mixed pyramid for one image; rgb is (H, W, 3), modalities (H, W, C)."""
        modalities = modalities or {}
        height, width = rgb.shape[:2]
        check_resolution(height, width, self.cfg.backbone.patch_size)
        features = self.provider.features(rgb, image_id)
        with torch.no_grad():
            f_img = self.fpn(features.to_torch(), (height, width))
            rasters = [
                torch.from_numpy(np.ascontiguousarray(modalities[name], dtype=np.float32))
                .permute(2, 0, 1)
                .unsqueeze(0)
                for name in sorted(modalities)
            ]
            self._f_mix = self.fuser(f_img, rasters)
        self._image_hw = (height, width)
        return self._f_mix

    def predict_map(self, interaction: InteractionTensor) -> np.ndarray:
        """Probability map for one click state; requires prepared features."""
        if self._f_mix is None:
            raise RuntimeError("predict_map before prepare_features")
        height, width, _ = interaction.shape
        if (height, width) != self._image_hw:
            raise ValueError(
                f"interaction tensor is {(height, width)}, prepared image is {self._image_hw}"
            )
        tensor = torch.from_numpy(interaction.data.copy()).permute(2, 0, 1)
        with torch.no_grad():
            f_int = self.patch_embed(tensor.unsqueeze(0))
            probabilities = self.csnet(self._f_mix, f_int)
        return probabilities.numpy().astype(np.float32)
