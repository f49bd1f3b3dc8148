"""Parallel feature pyramid adapters between ViT grids and stride-{4,8,16,32} features.

Every scale module is a fixed feed-forward chain of bilinear resizes,
convolutions, single-group GroupNorms (standing in for layer norm on
grids), and GELUs. The inverse adapter restores the backbone tensor shape
only; it is not a numerical inverse.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .config import FpnConfig, STRIDES, check_resolution


def _resize(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    if x.shape[-2:] == size:
        return x
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


class Scale4(nn.Module):
    def __init__(self, cfg: FpnConfig):
        super().__init__()
        hidden, embed = cfg.hidden_dims[0], cfg.embed_dims[0]
        self.conv1 = nn.Conv2d(cfg.d_fm, hidden, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden)
        self.conv2 = nn.Conv2d(hidden, hidden // 2, 3, 1, 1)
        self.norm2 = nn.GroupNorm(1, hidden // 2)
        self.conv3 = nn.Conv2d(hidden // 2, embed, 1)
        self.norm3 = nn.GroupNorm(1, embed)

    def forward(self, x, hw):
        h, w = hw
        x = _resize(x, (h // 8, w // 8))
        x = F.gelu(self.norm1(self.conv1(x)))
        x = _resize(x, (h // 4, w // 4))
        x = self.norm2(self.conv2(x))
        return F.gelu(self.norm3(self.conv3(x)))


class Scale8(nn.Module):
    def __init__(self, cfg: FpnConfig):
        super().__init__()
        hidden, embed = cfg.hidden_dims[1], cfg.embed_dims[1]
        self.conv1 = nn.Conv2d(cfg.d_fm, hidden, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden)
        self.conv2 = nn.Conv2d(hidden, embed, 1)
        self.norm2 = nn.GroupNorm(1, embed)

    def forward(self, x, hw):
        h, w = hw
        x = _resize(x, (h // 8, w // 8))
        x = self.norm1(self.conv1(x))
        return F.gelu(self.norm2(self.conv2(x)))


class _ConvThenResize(nn.Module):
    """Shared layout of the stride-16 and stride-32 scale modules."""

    def __init__(self, d_in: int, hidden: int, embed: int, divisor: int):
        super().__init__()
        self.divisor = divisor
        self.conv1 = nn.Conv2d(d_in, hidden, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden)
        self.conv2 = nn.Conv2d(hidden, embed, 1)
        self.norm2 = nn.GroupNorm(1, embed)

    def forward(self, x, hw):
        h, w = hw
        x = self.conv1(x)
        x = _resize(x, (h // self.divisor, w // self.divisor))
        x = self.norm1(x)
        return F.gelu(self.norm2(self.conv2(x)))


class ParallelFPN(nn.Module):
    """Four independent scale modules, one backbone tap each."""

    def __init__(self, cfg: FpnConfig | None = None):
        super().__init__()
        self.cfg = cfg or FpnConfig()
        self.scales = nn.ModuleList(
            [
                Scale4(self.cfg),
                Scale8(self.cfg),
                _ConvThenResize(self.cfg.d_fm, self.cfg.hidden_dims[2], self.cfg.embed_dims[2], 16),
                _ConvThenResize(self.cfg.d_fm, self.cfg.hidden_dims[3], self.cfg.embed_dims[3], 32),
            ]
        )
        self.calls = 0

    def forward(self, taps, image_hw):
        self.calls += 1
        h, w = image_hw
        check_resolution(h, w, self.cfg.patch_size)
        grid = (h // self.cfg.patch_size, w // self.cfg.patch_size)
        if len(taps) != 4:
            raise ValueError(f"expected 4 backbone taps, got {len(taps)}")
        for tap in taps:
            if tap.shape != (1, self.cfg.d_fm, *grid):
                raise ValueError(
                    f"backbone tap shape {tuple(tap.shape)} != {(1, self.cfg.d_fm, *grid)}"
                )
        pyramid = tuple(scale(tap, (h, w)) for scale, tap in zip(self.scales, taps))
        for level, stride, dim in zip(pyramid, STRIDES, self.cfg.embed_dims):
            expected = (1, dim, h // stride, w // stride)
            if level.shape != expected:
                raise ValueError(f"pyramid level shape {tuple(level.shape)} != {expected}")
        return pyramid


class InverseScale4(nn.Module):
    def __init__(self, cfg: FpnConfig):
        super().__init__()
        hidden, embed = cfg.hidden_dims[0], cfg.embed_dims[0]
        self.patch_size = cfg.patch_size
        self.conv1 = nn.Conv2d(embed, hidden // 2, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden // 2)
        self.conv2 = nn.Conv2d(hidden // 2, hidden, 3, 1, 1)
        self.norm2 = nn.GroupNorm(1, hidden)
        self.conv3 = nn.Conv2d(hidden, cfg.d_fm, 1)
        self.norm3 = nn.GroupNorm(1, cfg.d_fm)

    def forward(self, x, hw):
        h, w = hw
        x = _resize(x, (h // 8, w // 8))
        x = F.gelu(self.norm1(self.conv1(x)))
        x = _resize(x, (h // self.patch_size, w // self.patch_size))
        x = self.norm2(self.conv2(x))
        return F.gelu(self.norm3(self.conv3(x)))


class InverseScale8(nn.Module):
    def __init__(self, cfg: FpnConfig):
        super().__init__()
        hidden, embed = cfg.hidden_dims[1], cfg.embed_dims[1]
        self.patch_size = cfg.patch_size
        self.conv1 = nn.Conv2d(embed, hidden, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden)
        self.conv2 = nn.Conv2d(hidden, cfg.d_fm, 1)
        self.norm2 = nn.GroupNorm(1, cfg.d_fm)

    def forward(self, x, hw):
        h, w = hw
        x = _resize(x, (h // self.patch_size, w // self.patch_size))
        x = self.norm1(self.conv1(x))
        return F.gelu(self.norm2(self.conv2(x)))


class InverseScale16(nn.Module):
    def __init__(self, cfg: FpnConfig):
        super().__init__()
        hidden, embed = cfg.hidden_dims[2], cfg.embed_dims[2]
        self.patch_size = cfg.patch_size
        self.conv1 = nn.Conv2d(embed, hidden, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden)
        self.conv2 = nn.Conv2d(hidden, cfg.d_fm, 1)
        self.norm2 = nn.GroupNorm(1, cfg.d_fm)

    def forward(self, x, hw):
        h, w = hw
        x = self.conv1(x)
        x = _resize(x, (h // self.patch_size, w // self.patch_size))
        x = self.norm1(x)
        return F.gelu(self.norm2(self.conv2(x)))


class InverseScale32(nn.Module):
    def __init__(self, cfg: FpnConfig):
        super().__init__()
        hidden, embed = cfg.hidden_dims[3], cfg.embed_dims[3]
        self.patch_size = cfg.patch_size
        self.conv1 = nn.Conv2d(embed, hidden, 3, 1, 1)
        self.norm1 = nn.GroupNorm(1, hidden)
        self.conv2 = nn.Conv2d(hidden, cfg.d_fm, 1)
        self.norm2 = nn.GroupNorm(1, cfg.d_fm)

    def forward(self, x, hw):
        h, w = hw
        x = _resize(x, (h // self.patch_size, w // self.patch_size))
        x = self.norm1(self.conv1(x))
        return F.gelu(self.norm2(self.conv2(x)))


class InverseParallelFPN(nn.Module):
    """Maps a feature pyramid back to four backbone-shaped tensors (shape contract only)."""

    def __init__(self, cfg: FpnConfig | None = None):
        super().__init__()
        self.cfg = cfg or FpnConfig()
        self.scales = nn.ModuleList(
            [
                InverseScale4(self.cfg),
                InverseScale8(self.cfg),
                InverseScale16(self.cfg),
                InverseScale32(self.cfg),
            ]
        )

    def forward(self, pyramid, image_hw):
        h, w = image_hw
        check_resolution(h, w, self.cfg.patch_size)
        if len(pyramid) != 4:
            raise ValueError(f"expected 4 pyramid levels, got {len(pyramid)}")
        for level, stride, dim in zip(pyramid, STRIDES, self.cfg.embed_dims):
            expected = (1, dim, h // stride, w // stride)
            if level.shape != expected:
                raise ValueError(f"pyramid level shape {tuple(level.shape)} != {expected}")
        grid = (h // self.cfg.patch_size, w // self.cfg.patch_size)
        outputs = tuple(scale(level, (h, w)) for scale, level in zip(self.scales, pyramid))
        for out in outputs:
            if out.shape != (1, self.cfg.d_fm, *grid):
                raise ValueError(
                    f"inverse output shape {tuple(out.shape)} != {(1, self.cfg.d_fm, *grid)}"
                )
        return outputs
