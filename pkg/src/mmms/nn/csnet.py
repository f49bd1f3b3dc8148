"""Per-click subnetwork: interaction pyramid embedding and the mask head.

MSPatchEmbed rasterizes the 3-channel interaction tensor into the pyramid
shapes with one kernel-equals-stride convolution per level. CSNet runs
four transformer stages over the summed pyramids -- only the first stage
sees just f_mix + f_int, later stages add the downsampled previous stage
output -- and a fuse head turns the four stage outputs into a full
resolution probability map.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .attention import EncoderBlock, TokenNorm
from .config import DEFAULT_EMBED_DIMS, DEFAULT_HEADS, STRIDES, reduction_rates


class MSPatchEmbed(nn.Module):
    def __init__(self, embed_dims=DEFAULT_EMBED_DIMS):
        super().__init__()
        self.convs = nn.ModuleList(
            nn.Conv2d(3, dim, stride, stride) for dim, stride in zip(embed_dims, STRIDES)
        )
        self.calls = 0

    def forward(self, interaction: torch.Tensor):  # (1, 3, H, W)
        self.calls += 1
        _, _, h, w = interaction.shape
        if h % 32 or w % 32:
            raise ValueError(f"resolution {(h, w)} not divisible by 32")
        return tuple(conv(interaction) for conv in self.convs)


class CSNet(nn.Module):
    def __init__(
        self,
        embed_dims=DEFAULT_EMBED_DIMS,
        heads=DEFAULT_HEADS,
        depth: int = 1,
        head_dim: int = 128,
    ):
        super().__init__()
        reductions = reduction_rates()
        self.blocks = nn.ModuleList(
            nn.Sequential(*[EncoderBlock(dim, head, rate) for _ in range(depth)])
            for dim, head, rate in zip(embed_dims, heads, reductions)
        )
        # Stage-to-stage downsampling: overlapped stride-2 patch merging.
        self.merges = nn.ModuleList(
            nn.Conv2d(embed_dims[i], embed_dims[i + 1], 3, 2, 1) for i in range(3)
        )
        self.merge_norms = nn.ModuleList(TokenNorm(dim) for dim in embed_dims[1:])
        self.stage_projections = nn.ModuleList(
            nn.Conv2d(dim, head_dim, 1) for dim in embed_dims
        )
        self.fuse = nn.Conv2d(4 * head_dim, head_dim, 1)
        self.fuse_norm = nn.GroupNorm(1, head_dim)
        self.logits = nn.Conv2d(head_dim, 1, 1)
        self.calls = 0

    def forward(self, f_mix, f_int) -> torch.Tensor:
        self.calls += 1
        if len(f_mix) != 4 or len(f_int) != 4:
            raise ValueError("both pyramids must have 4 levels")
        for mix_level, int_level in zip(f_mix, f_int):
            if mix_level.shape != int_level.shape:
                raise ValueError(
                    f"pyramid mismatch: {tuple(mix_level.shape)} vs {tuple(int_level.shape)}"
                )
        h4, w4 = f_int[0].shape[-2:]
        height, width = h4 * STRIDES[0], w4 * STRIDES[0]

        outputs = []
        previous = None
        for stage in range(4):
            x = f_mix[stage] + f_int[stage]
            if stage > 0:
                x = x + self.merge_norms[stage - 1](self.merges[stage - 1](previous))
            x = self.blocks[stage](x)
            outputs.append(x)
            previous = x

        projected = [
            F.interpolate(proj(out), size=(h4, w4), mode="bilinear", align_corners=False)
            for proj, out in zip(self.stage_projections, outputs)
        ]
        fused = F.gelu(self.fuse_norm(self.fuse(torch.cat(projected, dim=1))))
        logits = F.interpolate(
            self.logits(fused), size=(height, width), mode="bilinear", align_corners=False
        )
        return torch.sigmoid(logits)[0, 0]
