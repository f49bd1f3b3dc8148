"""Wire-format helpers for the remote predictor protocol.

Messages are newline-delimited JSON. Dense rasters travel as base64 of
little-endian row-major samples, 8-bit or 16-bit per channel; masks travel
as row-major RLE objects {"h", "w", "counts"}.
"""
from __future__ import annotations

import base64
import json

import numpy as np

from ..errors import RemoteProtocolError
from ..masks import BinaryMask, Click, mask_from_json, mask_to_json


def raster_to_json(array: np.ndarray) -> dict:
    """Encode a (H, W) or (H, W, C) uint8/uint16 raster."""
    if array.ndim == 2:
        array = array[:, :, None]
    if array.dtype == np.uint8:
        depth = 8
    elif array.dtype == np.uint16:
        depth = 16
    else:
        raise ValueError(f"raster dtype must be uint8 or uint16, got {array.dtype}")
    payload = array.astype(array.dtype.newbyteorder("<")).tobytes()
    return {
        "h": int(array.shape[0]),
        "w": int(array.shape[1]),
        "channels": int(array.shape[2]),
        "depth": depth,
        "data": base64.b64encode(payload).decode("ascii"),
    }


def raster_from_json(obj: dict) -> np.ndarray:
    try:
        h, w, channels, depth = (int(obj[k]) for k in ("h", "w", "channels", "depth"))
        data = base64.b64decode(obj["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RemoteProtocolError(f"malformed raster object: {exc}", json.dumps(obj)[:200]) from exc
    dtype = np.dtype("<u1") if depth == 8 else np.dtype("<u2")
    if depth not in (8, 16):
        raise RemoteProtocolError(f"raster depth must be 8 or 16, got {depth}")
    expected = h * w * channels * dtype.itemsize
    if len(data) != expected:
        raise RemoteProtocolError(
            f"raster data is {len(data)} bytes, expected {expected}"
        )
    array = np.frombuffer(data, dtype).reshape(h, w, channels)
    return array[:, :, 0] if channels == 1 else array


def clicks_to_json(clicks) -> list[dict]:
    return [{"y": c.row, "x": c.col, "positive": bool(c.positive)} for c in clicks]


def clicks_from_json(items) -> tuple[Click, ...]:
    try:
        return tuple(Click(int(c["y"]), int(c["x"]), bool(c["positive"])) for c in items)
    except (KeyError, TypeError, ValueError) as exc:
        raise RemoteProtocolError(f"malformed click list: {exc}", json.dumps(items)[:200]) from exc


def predict_to_json(image_id: str, clicks, prev_mask: BinaryMask) -> dict:
    return {
        "type": "predict",
        "image_id": image_id,
        "clicks": clicks_to_json(clicks),
        "prev_mask": mask_to_json(prev_mask),
    }


def predict_from_json(obj: dict) -> tuple[str, tuple[Click, ...], BinaryMask]:
    try:
        image_id = str(obj["image_id"])
        clicks = clicks_from_json(obj["clicks"])
        prev = mask_from_json(obj["prev_mask"])
    except RemoteProtocolError:
        raise
    except (KeyError, ValueError) as exc:
        raise RemoteProtocolError(f"malformed predict message: {exc}", json.dumps(obj)[:200]) from exc
    return image_id, clicks, prev


def mask_reply_to_json(mask: BinaryMask) -> dict:
    return {"type": "mask", "mask": mask_to_json(mask)}


def mask_reply_from_json(obj: dict) -> BinaryMask:
    if "mask" not in obj:
        raise RemoteProtocolError("mask reply missing field 'mask'", json.dumps(obj)[:200])
    try:
        return mask_from_json(obj["mask"])
    except ValueError as exc:
        raise RemoteProtocolError(f"malformed mask field: {exc}", json.dumps(obj)[:200]) from exc
