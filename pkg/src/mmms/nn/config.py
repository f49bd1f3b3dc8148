"""Shape configuration for the feature pyramid stack."""
from __future__ import annotations

from dataclasses import dataclass, field

STRIDES = (4, 8, 16, 32)
DEFAULT_EMBED_DIMS = (64, 128, 320, 512)
DEFAULT_HEADS = (1, 2, 5, 8)


def reduction_rates(strides=STRIDES) -> tuple[int, ...]:
    """Key/value reduction per stride: (32/i)^2, i.e. (64, 16, 4, 1)."""
    return tuple((32 // s) ** 2 for s in strides)


def hidden_dims(d_fm: int, embed_dims=DEFAULT_EMBED_DIMS) -> tuple[int, int, int, int]:
    """Hidden widths of the four scale modules.

    The finest scale doubles its embed dim, and the coarser scales lean on
    the backbone width, so thin pyramids never bottleneck wide backbones.
    """
    return (
        max(2 * embed_dims[0], d_fm // 2),
        max(embed_dims[1], d_fm // 2),
        max(embed_dims[2], d_fm),
        max(embed_dims[3], 2 * d_fm),
    )


@dataclass(frozen=True)
class BackboneConfig:
    """ViT-style stub backbone geometry."""

    patch_size: int = 16
    embed_dim: int = 768
    depth: int = 12
    taps: tuple[int, ...] = (3, 6, 9, 12)
    heads: int = 12
    mlp_ratio: float = 4.0

    def __post_init__(self):
        if len(self.taps) != 4:
            raise ValueError("exactly four tap layers are required")
        if any(t < 1 for t in self.taps) or list(self.taps) != sorted(self.taps):
            raise ValueError(f"taps must be ascending and >= 1, got {self.taps}")
        if max(self.taps) > self.depth:
            raise ValueError(f"tap {max(self.taps)} exceeds depth {self.depth}")
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")


@dataclass(frozen=True)
class FpnConfig:
    """Geometry shared by ParallelFPN and InverseParallelFPN."""

    d_fm: int = 768
    patch_size: int = 16
    embed_dims: tuple[int, int, int, int] = DEFAULT_EMBED_DIMS

    @property
    def hidden_dims(self) -> tuple[int, int, int, int]:
        return hidden_dims(self.d_fm, self.embed_dims)


@dataclass(frozen=True)
class ModelConfig:
    """Full forward stack configuration."""

    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    embed_dims: tuple[int, int, int, int] = DEFAULT_EMBED_DIMS
    heads: tuple[int, int, int, int] = DEFAULT_HEADS
    encoder_depth: int = 1
    head_dim: int = 128

    def __post_init__(self):
        for dim, heads in zip(self.embed_dims, self.heads):
            if dim % heads:
                raise ValueError(f"embed dim {dim} not divisible by {heads} heads")

    @property
    def fpn(self) -> FpnConfig:
        return FpnConfig(self.backbone.embed_dim, self.backbone.patch_size, self.embed_dims)


def check_resolution(height: int, width: int, patch_size: int):
    """Pyramid strides need 32-divisibility; the backbone needs patch divisibility."""
    for size, name in ((height, "height"), (width, "width")):
        if size % 32:
            raise ValueError(f"{name} {size} not divisible by 32")
        if size % patch_size:
            raise ValueError(f"{name} {size} not divisible by patch size {patch_size}")
