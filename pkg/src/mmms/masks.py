"""Binary and joint mask values, IoU, click encoding, and the RLE codec.

All types are immutable after construction: the wrapped numpy buffers are
marked read-only, so values can be shared freely between worker threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_DISK_RADIUS = 5.0


class Click(NamedTuple):
    """A single user or simulated interaction event."""

    row: int
    col: int
    positive: bool


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """H×W boolean grid; the unit of prediction, ground truth and click maps."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2D grid, got shape {arr.shape}")
        object.__setattr__(self, "data", _freeze(arr.astype(bool)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def area(self) -> int:
        return int(np.count_nonzero(self.data))

    def is_empty(self) -> bool:
        return not self.data.any()

    @staticmethod
    def zeros(height: int, width: int) -> "BinaryMask":
        return BinaryMask(np.zeros((height, width), bool))

    @staticmethod
    def full(height: int, width: int) -> "BinaryMask":
        return BinaryMask(np.ones((height, width), bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


@dataclass(frozen=True, eq=False)
class JointMask:
    """H×W grid of surface ids in {0..L}; label 0 is background.

    Labels are stored as 16-bit ids, so up to 65535 surfaces per image.
    """

    labels: np.ndarray
    surface_count: int

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"joint mask must be a non-empty 2D grid, got shape {arr.shape}")
        if self.surface_count < 0 or self.surface_count > np.iinfo(np.uint16).max:
            raise ValueError(f"surface_count out of range: {self.surface_count}")
        if arr.size and int(arr.max()) > self.surface_count:
            raise ValueError(
                f"label {int(arr.max())} exceeds surface_count {self.surface_count}"
            )
        if arr.size and int(arr.min()) < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", _freeze(arr.astype(np.uint16)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @staticmethod
    def zeros(height: int, width: int, surface_count: int) -> "JointMask":
        return JointMask(np.zeros((height, width), np.uint16), surface_count)

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointMask):
            return NotImplemented
        return self.surface_count == other.surface_count and np.array_equal(
            self.labels, other.labels
        )

    def __hash__(self):
        return hash((self.surface_count, self.labels.tobytes()))


@dataclass(frozen=True)
class ClickMaps:
    """Rasterized click disks, one binary map per polarity."""

    positive_map: BinaryMask
    negative_map: BinaryMask
    disk_radius: float

    def __post_init__(self):
        if self.positive_map.shape != self.negative_map.shape:
            raise ValueError("click maps must share dimensions")


@dataclass(frozen=True)
class InteractionTensor:
    """(H, W, 3) float grid with channels (positive disks, negative disks, previous mask)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float32)  # always copy before freezing
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"interaction tensor must be (H, W, 3), got {arr.shape}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class RleMask:
    """Row-major run-length encoding; counts alternate starting with background."""

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.height < 1 or self.width < 1:
            raise ValueError("RLE dimensions must be positive")
        if any(c < 0 for c in self.counts):
            raise ValueError("RLE counts must be non-negative")

    def to_json(self) -> dict:
        return {"h": self.height, "w": self.width, "counts": list(self.counts)}

    @staticmethod
    def from_json(obj: dict) -> "RleMask":
        for key in ("h", "w", "counts"):
            if key not in obj:
                raise ValueError(f"RLE object missing field {key!r}")
        return RleMask(int(obj["h"]), int(obj["w"]), tuple(obj["counts"]))


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union in percentage points [0, 100].

    Two empty masks compare as 100 (vacuous perfection) so empty predictions
    against empty targets never divide by zero.
    """
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a.data | b.data))
    if union == 0:
        return 100.0
    inter = int(np.count_nonzero(a.data & b.data))
    return 100.0 * inter / union


def _stamp_disk(grid: np.ndarray, row: int, col: int, radius: float):
    h, w = grid.shape
    r = int(np.floor(radius))
    r0, r1 = max(0, row - r), min(h - 1, row + r)
    c0, c1 = max(0, col - r), min(w - 1, col + r)
    rr, cc = np.ogrid[r0 : r1 + 1, c0 : c1 + 1]
    grid[r0 : r1 + 1, c0 : c1 + 1] |= (rr - row) ** 2 + (cc - col) ** 2 <= radius**2


def encode_clicks(
    clicks: Sequence[Click], height: int, width: int, radius: float = DEFAULT_DISK_RADIUS
) -> ClickMaps:
    """Rasterize clicks as Euclidean disks of the given radius, one map per polarity."""
    if radius < 0:
        raise ValueError("disk radius must be >= 0")
    pos = np.zeros((height, width), bool)
    neg = np.zeros((height, width), bool)
    for click in clicks:
        if not (0 <= click.row < height and 0 <= click.col < width):
            raise ValueError(f"click {click} out of bounds for {height}x{width}")
        _stamp_disk(pos if click.positive else neg, click.row, click.col, radius)
    return ClickMaps(BinaryMask(pos), BinaryMask(neg), radius)


def assemble_interaction(
    clicks: Sequence[Click], prev_mask: BinaryMask, radius: float = DEFAULT_DISK_RADIUS
) -> InteractionTensor:
    """Stack click disks and the previous mask into the 3-channel interaction tensor."""
    maps = encode_clicks(clicks, prev_mask.height, prev_mask.width, radius)
    stacked = np.stack(
        [maps.positive_map.data, maps.negative_map.data, prev_mask.data], axis=-1
    )
    return InteractionTensor(stacked.astype(np.float32))


def _check_surface(joint: JointMask, surface: int):
    if not 1 <= surface <= joint.surface_count:
        raise ValueError(
            f"surface id {surface} outside 1..{joint.surface_count}"
        )


def _check_joint_dims(joint: JointMask, mask: BinaryMask):
    if joint.shape != mask.shape:
        raise ValueError(f"dimension mismatch: {joint.shape} vs {mask.shape}")


def joint_insert_classical(joint: JointMask, surface: int, mask: BinaryMask) -> JointMask:
    """Paste a surface mask onto the joint grid; only set pixels are overwritten."""
    _check_surface(joint, surface)
    _check_joint_dims(joint, mask)
    labels = np.where(mask.data, np.uint16(surface), joint.labels)
    return JointMask(labels, joint.surface_count)


def joint_insert_revisit(joint: JointMask, surface: int, mask: BinaryMask) -> JointMask:
    """Re-insert a corrected surface mask.

    Set pixels become the surface id; pixels the correction dropped (mask 0
    but currently labeled with this surface) fall back to background; all
    other pixels keep their label.
    """
    _check_surface(joint, surface)
    _check_joint_dims(joint, mask)
    labels = joint.labels.copy()
    labels[~mask.data & (labels == surface)] = 0
    labels[mask.data] = surface
    return JointMask(labels, joint.surface_count)


def joint_extract(joint: JointMask, surface: int) -> BinaryMask:
    """Binary mask of the pixels currently labeled with the given surface id."""
    _check_surface(joint, surface)
    return BinaryMask(joint.labels == surface)


def rle_encode(mask: BinaryMask) -> RleMask:
    """Row-major RLE; runs alternate 0/1 starting with a background run (possibly 0)."""
    flat = mask.data.ravel()
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return RleMask(mask.height, mask.width, tuple(counts))


def rle_decode(rle: RleMask) -> BinaryMask:
    total = sum(rle.counts)
    expected = rle.height * rle.width
    if total != expected:
        raise ValueError(f"RLE counts sum to {total}, expected {expected}")
    values = np.arange(len(rle.counts)) % 2 == 1
    flat = np.repeat(values, rle.counts)
    return BinaryMask(flat.reshape(rle.height, rle.width))


def mask_to_json(mask: BinaryMask) -> dict:
    return rle_encode(mask).to_json()


def mask_from_json(obj: dict) -> BinaryMask:
    return rle_decode(RleMask.from_json(obj))
