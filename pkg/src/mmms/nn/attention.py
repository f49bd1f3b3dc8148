"""Efficient attention with spatially reduced keys/values, and the blocks built on it."""
from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn


def to_tokens(x: torch.Tensor) -> torch.Tensor:
    """(1, C, H, W) -> (1, H*W, C)"""
    return x.flatten(2).transpose(1, 2)


def to_grid(tokens: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """(1, N, C) -> (1, C, H, W)"""
    return tokens.transpose(1, 2).reshape(1, -1, height, width)


class EffAttention(nn.Module):
    """Cross-attention keeping every query while merging keys/values spatially.

    The key/value grid is cut into non-overlapping sqrt(R) x sqrt(R) patches
    whose channels are concatenated and linearly projected back to the model
    width, shrinking the attended set by the reduction rate R. With R = 1
    this collapses to ordinary attention over the full grid.
    """

    def __init__(self, dim: int, heads: int = 1, reduction: int = 1):
        super().__init__()
        side = math.isqrt(reduction)
        if side * side != reduction:
            raise ValueError(f"reduction rate {reduction} is not a perfect square")
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.reduction = reduction
        self.side = side
        self.q = nn.Linear(dim, dim)
        self.merge = nn.Linear(dim * reduction, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)

    def _merge_kv(self, kv: torch.Tensor) -> torch.Tensor:
        _, c, h, w = kv.shape
        s = self.side
        if h % s or w % s:
            raise ValueError(f"spatial extent {(h, w)} not divisible by sqrt(R)={s}")
        patches = (
            kv.reshape(1, c, h // s, s, w // s, s)
            .permute(0, 2, 4, 3, 5, 1)
            .reshape(1, (h // s) * (w // s), s * s * c)
        )
        return self.merge(patches)

    def forward(self, query_feat: torch.Tensor, kv_feat: torch.Tensor) -> torch.Tensor:
        if query_feat.shape[-2:] != kv_feat.shape[-2:]:
            raise ValueError(
                f"query grid {tuple(query_feat.shape[-2:])} != kv grid {tuple(kv_feat.shape[-2:])}"
            )
        _, _, h, w = query_feat.shape
        q = self.q(to_tokens(query_feat))
        kv = self._merge_kv(kv_feat)
        k, v = self.k(kv), self.v(kv)

        head_dim = self.dim // self.heads
        q = q.reshape(1, -1, self.heads, head_dim).transpose(1, 2)
        k = k.reshape(1, -1, self.heads, head_dim).transpose(1, 2)
        v = v.reshape(1, -1, self.heads, head_dim).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(head_dim), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(1, -1, self.dim)
        return to_grid(self.proj(out), h, w)


class TokenNorm(nn.Module):
    """LayerNorm over channels, applied to a (1, C, H, W) grid."""

    def __init__(self, dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return to_grid(self.norm(to_tokens(x)), x.shape[-2], x.shape[-1])


class Mlp(nn.Module):
    def __init__(self, dim: int, ratio: float = 4.0):
        super().__init__()
        hidden = int(dim * ratio)
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        grid = x.dim() == 4
        if grid:
            h, w = x.shape[-2:]
            x = to_tokens(x)
        x = self.fc2(F.gelu(self.fc1(x)))
        return to_grid(x, h, w) if grid else x


class CrossBlock(nn.Module):
    """Residual fusion of an image-side grid with a modality-side grid.

    mixed_hat = EffCA(LN(f_img), LN(f_mod)) + f_img + f_mod
    mixed     = MLP(LN(mixed_hat)) + mixed_hat

    Every LayerNorm has its own parameters.
    """

    def __init__(self, dim: int, heads: int = 1, reduction: int = 1):
        super().__init__()
        self.norm_q = TokenNorm(dim)
        self.norm_kv = TokenNorm(dim)
        self.attention = EffAttention(dim, heads, reduction)
        self.norm_mlp = TokenNorm(dim)
        self.mlp = Mlp(dim)

    def forward(self, f_img: torch.Tensor, f_mod: torch.Tensor) -> torch.Tensor:
        if f_img.shape != f_mod.shape:
            raise ValueError(f"shape mismatch: {tuple(f_img.shape)} vs {tuple(f_mod.shape)}")
        mixed = self.attention(self.norm_q(f_img), self.norm_kv(f_mod)) + f_img + f_mod
        return self.mlp(self.norm_mlp(mixed)) + mixed


class EncoderBlock(nn.Module):
    """Pre-norm transformer block whose attention is the efficient self-attention."""

    def __init__(self, dim: int, heads: int = 1, reduction: int = 1):
        super().__init__()
        self.norm1 = TokenNorm(dim)
        self.attention = EffAttention(dim, heads, reduction)
        self.norm2 = TokenNorm(dim)
        self.mlp = Mlp(dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        normed = self.norm1(x)
        x = x + self.attention(normed, normed)
        return x + self.mlp(self.norm2(x))
