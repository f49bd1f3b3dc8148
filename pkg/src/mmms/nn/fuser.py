"""Multi-modal fusion: per-modality encoders plus cross-attention mixing.

Each non-RGB modality runs through its own 4-stage efficient-self-attention
encoder, then a chain of CrossBlocks merges the modality pyramid into the
image pyramid at every stride. With several modalities the CrossBlock
chains run sequentially: the mixed pyramid from one modality becomes the
image-side input for the next. With zero modalities the module is a bypass.
"""
from __future__ import annotations

import torch
from torch import nn

from .attention import CrossBlock, EncoderBlock, TokenNorm
from .config import DEFAULT_EMBED_DIMS, DEFAULT_HEADS, STRIDES, reduction_rates


class ModalityEncoder(nn.Module):
    """4-stage encoder turning one (1, C, H, W) raster into a feature pyramid."""

    def __init__(
        self,
        in_channels: int,
        embed_dims=DEFAULT_EMBED_DIMS,
        heads=DEFAULT_HEADS,
        depth: int = 1,
    ):
        super().__init__()
        reductions = reduction_rates()
        embeds = []
        blocks = []
        previous = in_channels
        for index, dim in enumerate(embed_dims):
            if index == 0:
                embeds.append(nn.Conv2d(previous, dim, 7, 4, 3))  # overlapped stride-4 stem
            else:
                embeds.append(nn.Conv2d(previous, dim, 3, 2, 1))
            blocks.append(
                nn.Sequential(*[EncoderBlock(dim, heads[index], reductions[index]) for _ in range(depth)])
            )
            previous = dim
        self.embeds = nn.ModuleList(embeds)
        self.norms = nn.ModuleList(TokenNorm(dim) for dim in embed_dims)
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor):
        pyramid = []
        for embed, norm, block in zip(self.embeds, self.norms, self.blocks):
            x = block(norm(embed(x)))
            pyramid.append(x)
        return tuple(pyramid)


class MMFuser(nn.Module):
    """One encoder and one CrossBlock per stride per modality."""

    def __init__(
        self,
        modality_channels: tuple[int, ...],
        embed_dims=DEFAULT_EMBED_DIMS,
        heads=DEFAULT_HEADS,
        depth: int = 1,
    ):
        super().__init__()
        reductions = reduction_rates()
        self.encoders = nn.ModuleList(
            ModalityEncoder(channels, embed_dims, heads, depth) for channels in modality_channels
        )
        self.cross_blocks = nn.ModuleList(
            nn.ModuleList(
                CrossBlock(dim, head, rate)
                for dim, head, rate in zip(embed_dims, heads, reductions)
            )
            for _ in modality_channels
        )
        self.calls = 0

    def forward(self, f_img, modalities):
        self.calls += 1
        if len(modalities) != len(self.encoders):
            raise ValueError(
                f"got {len(modalities)} modalities, model fuses {len(self.encoders)}"
            )
        current = tuple(f_img)
        for encoder, blocks, raster in zip(self.encoders, self.cross_blocks, modalities):
            if raster.shape[-2:] != (current[0].shape[-2] * STRIDES[0],
                                     current[0].shape[-1] * STRIDES[0]):
                raise ValueError(
                    f"modality resolution {tuple(raster.shape[-2:])} does not match pyramid"
                )
            f_mod = encoder(raster)
            current = tuple(
                block(image_level, mod_level)
                for block, image_level, mod_level in zip(blocks, current, f_mod)
            )
        return current
