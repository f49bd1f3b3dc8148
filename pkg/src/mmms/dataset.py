"""Dataset layout, sample loading, and the synthetic multi-surface generator.

A dataset directory holds `manifest.json` plus `rgb/`, `gt/` and one
subdirectory per declared modality, with one PNG per image id. The joint
ground truth is a single-channel PNG whose pixel value is the surface id
(0 = background); ids are relabeled to a contiguous 0..L range at load.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np
from PIL import Image

from .errors import DatasetError
from .masks import JointMask

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ModalitySpec:
    name: str
    channels: int = 1
    scale: int = 65535  # raw value divisor used to normalize to [0, 1]


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    images: tuple[str, ...]
    modalities: tuple[ModalitySpec, ...] = ()
    gt: str = "joint_png"

    @staticmethod
    def load(root: str | Path) -> "DatasetManifest":
        root = Path(root)
        path = root / MANIFEST_NAME
        if not path.is_file():
            raise DatasetError(f"no {MANIFEST_NAME} under {root}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DatasetError(f"malformed manifest {path}: {exc}") from exc
        try:
            modalities = tuple(
                ModalitySpec(m["name"], int(m.get("channels", 1)), int(m.get("scale", 65535)))
                for m in raw.get("modalities", [])
            )
            return DatasetManifest(root, tuple(raw["images"]), modalities, raw.get("gt", "joint_png"))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"manifest {path} missing field: {exc}") from exc

    def save(self):
        payload = {
            "images": list(self.images),
            "modalities": [
                {"name": m.name, "channels": m.channels, "scale": m.scale}
                for m in self.modalities
            ],
            "gt": self.gt,
        }
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / MANIFEST_NAME).write_text(json.dumps(payload, indent=2, sort_keys=True))

    def modality_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modalities)


@dataclass(frozen=True)
class Sample:
    """One fully decoded dataset entry."""

    image_id: str
    rgb: np.ndarray  # (H, W, 3) uint8
    modalities: dict[str, np.ndarray]  # name -> (H, W, C) float32 in [0, 1]
    gt_joint: JointMask
    label_map: dict[int, int] = field(default_factory=dict)  # raw gt value -> surface id

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


def _read_png(path: Path, image_id: str, what: str) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing {what} file for image {image_id!r}: {path}")
    with Image.open(path) as img:
        return np.asarray(img)


def load_sample(manifest: DatasetManifest, image_id: str) -> Sample:
    """Decode one image with its modalities and joint ground truth."""
    if image_id not in manifest.images:
        raise DatasetError(f"image id {image_id!r} not in manifest")

    rgb = _read_png(manifest.root / "rgb" / f"{image_id}.png", image_id, "rgb")
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise DatasetError(f"rgb raster for {image_id!r} must be H x W x 3")
    rgb = rgb[:, :, :3].astype(np.uint8)
    h, w = rgb.shape[:2]

    modalities: dict[str, np.ndarray] = {}
    for spec in manifest.modalities:
        raw = _read_png(manifest.root / spec.name / f"{image_id}.png", image_id, f"modality {spec.name!r}")
        if raw.ndim == 2:
            raw = raw[:, :, None]
        if raw.shape[:2] != (h, w):
            raise DatasetError(
                f"modality {spec.name!r} for {image_id!r} is {raw.shape[:2]}, rgb is {(h, w)}"
            )
        if raw.shape[2] != spec.channels:
            raise DatasetError(
                f"modality {spec.name!r} for {image_id!r} has {raw.shape[2]} channels, "
                f"manifest declares {spec.channels}"
            )
        scale = spec.scale if raw.dtype.itemsize > 1 else 255
        modalities[spec.name] = (raw.astype(np.float32) / float(scale)).clip(0.0, 1.0)

    gt_raw = _read_png(manifest.root / "gt" / f"{image_id}.png", image_id, "ground truth")
    if gt_raw.ndim != 2:
        raise DatasetError(f"joint ground truth for {image_id!r} must be single-channel")
    if gt_raw.shape != (h, w):
        raise DatasetError(f"ground truth for {image_id!r} is {gt_raw.shape}, rgb is {(h, w)}")

    raw_ids = [int(v) for v in np.unique(gt_raw) if v != 0]
    if len(raw_ids) > np.iinfo(np.uint16).max:
        raise DatasetError(f"{image_id!r} has {len(raw_ids)} surfaces; limit is 65535")
    label_map = {raw: index + 1 for index, raw in enumerate(raw_ids)}
    labels = np.zeros((h, w), np.uint16)
    for raw, new in label_map.items():
        labels[gt_raw == raw] = new

    return Sample(image_id, rgb, modalities, JointMask(labels, len(raw_ids)), label_map)


def load_samples(manifest: DatasetManifest):
    for image_id in manifest.images:
        yield load_sample(manifest, image_id)


# --- synthetic data -------------------------------------------------------

_PALETTE = np.array(
    [
        (202, 58, 48),
        (58, 128, 202),
        (72, 178, 90),
        (214, 168, 46),
        (142, 68, 196),
        (46, 186, 186),
        (226, 110, 30),
        (120, 96, 60),
    ],
    np.uint8,
)
_BACKGROUND = np.array((126, 126, 126), np.uint8)


def _draw_shape(rng: np.random.Generator, h: int, w: int, anchor=None) -> np.ndarray:
    """One random rectangle or ellipse mask; anchor optionally pins the top-left."""
    sh = int(rng.integers(max(4, h // 8), max(6, h // 3)))
    sw = int(rng.integers(max(4, w // 8), max(6, w // 3)))
    if anchor is None:
        r0 = int(rng.integers(1, max(2, h - sh - 1)))
        c0 = int(rng.integers(1, max(2, w - sw - 1)))
    else:
        r0, c0 = anchor
        sh = min(sh, h - r0 - 1)
        sw = min(sw, w - c0 - 1)
    grid = np.zeros((h, w), bool)
    if rng.random() < 0.5:
        grid[r0 : r0 + sh, c0 : c0 + sw] = True
    else:
        rr, cc = np.ogrid[:h, :w]
        cy, cx = r0 + sh / 2, c0 + sw / 2
        grid |= ((rr - cy) / (sh / 2)) ** 2 + ((cc - cx) / (sw / 2)) ** 2 <= 1.0
    return grid


def _place_shapes(rng: np.random.Generator, h: int, w: int, surfaces: int, overlap: str):
    """Label grid with every surface id present; retries until valid."""
    from scipy import ndimage

    for _ in range(200):
        labels = np.zeros((h, w), np.uint16)
        shapes = []
        if overlap == "disjoint":
            for _k in range(surfaces):
                for _try in range(200):
                    shape = _draw_shape(rng, h, w)
                    grown = ndimage.binary_dilation(shape, iterations=2)
                    if all(not (grown & other).any() for other in shapes):
                        shapes.append(shape)
                        break
                else:
                    break
            if len(shapes) < surfaces:
                continue
        else:  # adjacent: the first two shapes share an edge, the rest may overlap
            sh = int(rng.integers(h // 6, h // 3))
            sw = int(rng.integers(w // 6, w // 4))
            r0 = int(rng.integers(1, h - sh - 1))
            c0 = int(rng.integers(1, w - 2 * sw - 1))
            first = np.zeros((h, w), bool)
            first[r0 : r0 + sh, c0 : c0 + sw] = True
            second = np.zeros((h, w), bool)
            second[r0 : r0 + sh, c0 + sw : c0 + 2 * sw] = True
            shapes = [first, second]
            shapes += [_draw_shape(rng, h, w) for _k in range(surfaces - 2)]
            shapes = shapes[:surfaces]
        for index, shape in enumerate(shapes, start=1):
            labels[shape] = index
        present = set(np.unique(labels)) - {0}
        if len(present) == len(shapes) == surfaces:
            return labels
    raise DatasetError(f"could not place {surfaces} {overlap} surfaces on a {h}x{w} canvas")


def generate_synthetic(
    out_dir: str | Path,
    seed: int,
    count: int,
    surfaces_per_image: int = 3,
    overlap_mode: str = "adjacent",
    size: tuple[int, int] = (64, 64),
    noise: float = 6.0,
) -> DatasetManifest:
    """Write a deterministic shapes dataset with a depth-like modality.

    overlap_mode 'disjoint' keeps surfaces separated by a 2 px gap;
    'adjacent' guarantees at least one pair of surfaces sharing an edge.
    """
    if count < 1:
        raise DatasetError("count must be >= 1")
    if overlap_mode not in ("disjoint", "adjacent"):
        raise DatasetError(f"unknown overlap mode {overlap_mode!r}")
    if overlap_mode == "adjacent" and surfaces_per_image < 2:
        raise DatasetError("adjacent mode needs at least 2 surfaces per image")
    h, w = size
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    image_ids = []
    for index in range(count):
        image_id = f"img{index:04d}"
        labels = _place_shapes(rng, h, w, surfaces_per_image, overlap_mode)

        rgb = np.broadcast_to(_BACKGROUND, (h, w, 3)).astype(np.float32)
        depth = np.zeros((h, w), np.float32)
        for k in range(1, surfaces_per_image + 1):
            rgb = np.where((labels == k)[:, :, None], _PALETTE[(k - 1) % len(_PALETTE)], rgb)
            depth[labels == k] = k / (surfaces_per_image + 1)
        if noise > 0:
            rgb = rgb + rng.normal(0.0, noise, rgb.shape)
        rgb8 = rgb.clip(0, 255).astype(np.uint8)
        depth16 = (depth * 65535).round().astype(np.uint16)

        for sub in ("rgb", "gt", "depth"):
            (out_dir / sub).mkdir(parents=True, exist_ok=True)
        Image.fromarray(rgb8, mode="RGB").save(out_dir / "rgb" / f"{image_id}.png")
        Image.fromarray(labels.astype(np.uint8), mode="L").save(out_dir / "gt" / f"{image_id}.png")
        Image.fromarray(depth16).save(out_dir / "depth" / f"{image_id}.png")
        image_ids.append(image_id)

    manifest = DatasetManifest(
        out_dir, tuple(image_ids), (ModalitySpec("depth", 1, 65535),)
    )
    manifest.save()
    return manifest
