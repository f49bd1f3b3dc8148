"""Stub ViT backbone and the in-process feature provider.

The stub stands in for a black-box feature service: a seeded, frozen,
position-free transformer whose only job is to emit deterministic feature
taps of the right shape. It is interchangeable with the file-backed
archive provider behind the same `features(rgb, image_id)` interface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import BackboneConfig


@dataclass(frozen=True)
class BackboneFeatures:
    """Four taps of shape (H/P, W/P, d), row-major float32."""

    taps: tuple[np.ndarray, ...]
    patch_size: int
    embed_dim: int

    def __post_init__(self):
        if len(self.taps) != 4:
            raise ValueError("exactly four feature taps expected")
        first = self.taps[0].shape
        for tap in self.taps:
            if tap.ndim != 3 or tap.shape != first or tap.shape[2] != self.embed_dim:
                raise ValueError(f"inconsistent tap shape {tap.shape}, expected {first}")

    @property
    def grid(self) -> tuple[int, int]:
        return self.taps[0].shape[:2]

    @property
    def image_hw(self) -> tuple[int, int]:
        return (self.grid[0] * self.patch_size, self.grid[1] * self.patch_size)

    def to_torch(self) -> tuple[torch.Tensor, ...]:
        # copy: taps may be read-only views (e.g. out of an archive buffer)
        return tuple(
            torch.from_numpy(np.array(tap, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)
            for tap in self.taps
        )


class _ViTBlock(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # (1, N, C)
        _, n, c = x.shape
        head_dim = c // self.heads
        q, k, v = self.qkv(self.norm1(x)).chunk(3, dim=-1)
        q = q.reshape(1, n, self.heads, head_dim).transpose(1, 2)
        k = k.reshape(1, n, self.heads, head_dim).transpose(1, 2)
        v = v.reshape(1, n, self.heads, head_dim).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(head_dim), dim=-1)
        x = x + self.proj((attn @ v).transpose(1, 2).reshape(1, n, c))
        h = self.fc2(torch.nn.functional.gelu(self.fc1(self.norm2(x))))
        return x + h


class StubBackbone(nn.Module):
    """Patchify + transformer blocks, emitting taps after the configured layers."""

    def __init__(self, cfg: BackboneConfig | None = None):
        super().__init__()
        self.cfg = cfg or BackboneConfig()
        self.patch_embed = nn.Conv2d(
            3, self.cfg.embed_dim, self.cfg.patch_size, self.cfg.patch_size
        )
        self.blocks = nn.ModuleList(
            _ViTBlock(self.cfg.embed_dim, self.cfg.heads, self.cfg.mlp_ratio)
            for _ in range(self.cfg.depth)
        )

    def forward(self, x: torch.Tensor):  # (1, 3, H, W)
        _, _, h, w = x.shape
        if h % self.cfg.patch_size or w % self.cfg.patch_size:
            raise ValueError(
                f"resolution {(h, w)} not divisible by patch size {self.cfg.patch_size}"
            )
        gh, gw = h // self.cfg.patch_size, w // self.cfg.patch_size
        tokens = self.patch_embed(x).flatten(2).transpose(1, 2)
        taps = []
        for index, block in enumerate(self.blocks, start=1):
            tokens = block(tokens)
            if index in self.cfg.taps:
                taps.append(tokens.transpose(1, 2).reshape(1, -1, gh, gw))
        return taps


class StubBackboneProvider:
    """Seeded deterministic feature source; counts calls for the once-per-image audit."""

    def __init__(self, seed: int = 0, cfg: BackboneConfig | None = None):
        self.seed = seed
        self.cfg = cfg or BackboneConfig()
        torch.manual_seed(seed)
        self.model = StubBackbone(self.cfg)
        self.model.eval()
        for parameter in self.model.parameters():
            parameter.requires_grad_(False)
        self.calls = 0

    def features(self, rgb: np.ndarray, image_id: str = "") -> BackboneFeatures:
        """rgb: (H, W, 3) uint8 or float in [0, 1]."""
        self.calls += 1
        array = np.asarray(rgb, dtype=np.float32)
        if array.max() > 1.0:
            array = array / 255.0
        tensor = torch.from_numpy(array).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            taps = self.model(tensor)
        return BackboneFeatures(
            tuple(t.squeeze(0).permute(1, 2, 0).numpy().astype(np.float32) for t in taps),
            self.cfg.patch_size,
            self.cfg.embed_dim,
        )
