"""File-backed feature archive: one binary file per image.

Layout (little-endian):
    bytes 0..3   magic "MMFT"
    u32          version (currently 1)
    u32 x 2      image height, width
    u32          patch size
    u32          embed dim
    u32          tap count
    then tap-count tensors of float32, each (H/P) * (W/P) * d row-major.

Produced by the `extract-features` CLI, consumed by ArchiveFeatureProvider,
which plugs in wherever the in-process stub backbone does.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import PredictorError
from .backbone import BackboneFeatures

MAGIC = b"MMFT"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIII")


def write_features(path: str | Path, features: BackboneFeatures) -> Path:
    path = Path(path)
    h, w = features.image_hw
    gh, gw = features.grid
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(
            _HEADER.pack(MAGIC, VERSION, h, w, features.patch_size, features.embed_dim,
                         len(features.taps))
        )
        for tap in features.taps:
            if tap.shape != (gh, gw, features.embed_dim):
                raise ValueError(f"tap shape {tap.shape} inconsistent with header")
            handle.write(np.ascontiguousarray(tap, dtype="<f4").tobytes())
    return path


def read_features(path: str | Path) -> BackboneFeatures:
    path = Path(path)
    if not path.is_file():
        raise PredictorError(f"missing feature archive entry: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise PredictorError(f"feature file {path} truncated")
    magic, version, h, w, patch, dim, taps = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise PredictorError(f"feature file {path} has bad magic {magic!r}")
    if version != VERSION:
        raise PredictorError(f"feature file {path} has unsupported version {version}")
    if h % patch or w % patch:
        raise PredictorError(f"feature file {path} header inconsistent: {h}x{w} vs patch {patch}")
    gh, gw = h // patch, w // patch
    expected = _HEADER.size + taps * gh * gw * dim * 4
    if len(blob) != expected:
        raise PredictorError(f"feature file {path} is {len(blob)} bytes, expected {expected}")
    arrays = []
    offset = _HEADER.size
    for _ in range(taps):
        size = gh * gw * dim * 4
        arrays.append(
            np.frombuffer(blob, "<f4", count=gh * gw * dim, offset=offset).reshape(gh, gw, dim)
        )
        offset += size
    return BackboneFeatures(tuple(arrays), patch, dim)


class ArchiveFeatureProvider:
    """Feature source that looks up precomputed taps by image id."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.calls = 0

    def features(self, rgb: np.ndarray, image_id: str = "") -> BackboneFeatures:
        self.calls += 1
        features = read_features(self.directory / f"{image_id}.mmft")
        if rgb is not None and rgb.shape[:2] != features.image_hw:
            raise PredictorError(
                f"archived features for {image_id!r} are {features.image_hw}, "
                f"image is {rgb.shape[:2]}"
            )
        return features
