"""Forward-only neural stack: backbone providers, pyramid adapters, fusion, and the click head.

Convention: dense features cross module boundaries as torch tensors shaped
(1, C, H, W); numpy arrays at the package boundary are row-major (H, W, C)
float32. All weights are frozen after seeded construction; nothing here
trains.
"""
from .config import (
    STRIDES,
    BackboneConfig,
    FpnConfig,
    ModelConfig,
    hidden_dims,
    reduction_rates,
)
from .backbone import BackboneFeatures, StubBackbone, StubBackboneProvider
from .archive import ArchiveFeatureProvider, read_features, write_features
from .fpn import InverseParallelFPN, ParallelFPN
from .attention import CrossBlock, EffAttention, EncoderBlock
from .fuser import MMFuser, ModalityEncoder
from .csnet import CSNet, MSPatchEmbed
from .model import InteractiveSegmenter

__all__ = [
    "STRIDES",
    "BackboneConfig",
    "FpnConfig",
    "ModelConfig",
    "hidden_dims",
    "reduction_rates",
    "BackboneFeatures",
    "StubBackbone",
    "StubBackboneProvider",
    "ArchiveFeatureProvider",
    "read_features",
    "write_features",
    "ParallelFPN",
    "InverseParallelFPN",
    "EffAttention",
    "CrossBlock",
    "EncoderBlock",
    "MMFuser",
    "ModalityEncoder",
    "MSPatchEmbed",
    "CSNet",
    "InteractiveSegmenter",
]
