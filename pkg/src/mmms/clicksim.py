"""Deterministic automatic click placement.

The simulated user always targets the largest misclassified region and
clicks its deepest interior pixel: positive for missing foreground,
negative for spurious foreground. Components use 4-connectivity and the
image border counts as region exterior, which keeps clicks off mask rims.
Ties (equal component area, equal interior depth) resolve in row-major
order so benchmark runs are bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .masks import BinaryMask, Click


@dataclass(frozen=True)
class Component:
    """One 4-connected region of an error mask."""

    mask: BinaryMask
    area: int
    anchor: tuple[int, int]  # first set pixel in row-major order


@dataclass(frozen=True)
class ErrorAnalysis:
    """Connected components of the false-negative and false-positive sets."""

    false_negative_regions: tuple[Component, ...]
    false_positive_regions: tuple[Component, ...]


def connected_components(mask: BinaryMask) -> list[Component]:
    """4-connected components of the set pixels, in first-encounter order."""
    labeled, count = ndimage.label(mask.data)
    components = []
    for index in range(1, count + 1):
        grid = labeled == index
        first = int(np.argmax(grid))
        anchor = (first // mask.width, first % mask.width)
        components.append(Component(BinaryMask(grid), int(np.count_nonzero(grid)), anchor))
    return components


def distance_to_complement(component: BinaryMask) -> np.ndarray:
    """Exact Euclidean distance to the nearest pixel outside the component.

    The virtual ring just outside the image belongs to the complement, so a
    set pixel on the border has distance 1.
    """
    padded = np.pad(component.data, 1)
    distances = ndimage.distance_transform_edt(padded)
    return distances[1:-1, 1:-1]


def analyze_errors(pred: BinaryMask, gt: BinaryMask) -> ErrorAnalysis:
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {gt.shape}")
    false_neg = BinaryMask(gt.data & ~pred.data)
    false_pos = BinaryMask(pred.data & ~gt.data)
    return ErrorAnalysis(
        tuple(connected_components(false_neg)),
        tuple(connected_components(false_pos)),
    )


def next_click(pred: BinaryMask, gt: BinaryMask) -> Click | None:
    """The next simulated click, or None when the prediction is already exact."""
    analysis = analyze_errors(pred, gt)
    candidates = [(comp, True) for comp in analysis.false_negative_regions]
    candidates += [(comp, False) for comp in analysis.false_positive_regions]
    if not candidates:
        return None
    # Largest area wins; area ties resolve to the smallest row-major anchor.
    comp, positive = min(candidates, key=lambda item: (-item[0].area, item[0].anchor))
    distances = distance_to_complement(comp.mask)
    flat = int(np.argmax(distances))
    return Click(flat // pred.width, flat % pred.width, positive)
