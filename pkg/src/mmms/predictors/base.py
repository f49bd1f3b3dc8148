"""Predictor abstraction shared by all backends.

A predictor is prepared once per image (feature phase, timed separately)
and then answers any number of predict calls (click phase). Backends must
be deterministic functions of (sample, clicks, prev_mask) and their own
configuration, so runs can be replayed bit-exactly.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..dataset import Sample
from ..errors import PredictorError
from ..masks import BinaryMask, Click


@dataclass(frozen=True)
class PredictRequest:
    clicks: tuple[Click, ...]
    prev_mask: BinaryMask
    surface: int = 0
    image_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "clicks", tuple(self.clicks))
        for click in self.clicks:
            if not (0 <= click.row < self.prev_mask.height and 0 <= click.col < self.prev_mask.width):
                raise ValueError(f"click {click} out of bounds for {self.prev_mask.shape}")


@dataclass
class PredictResponse:
    probabilities: np.ndarray  # (H, W) float32 in [0, 1]
    click_seconds: float = 0.0


class Predictor:
    """Base class handling phase timing and response validation."""

    name = "base"

    def __init__(self):
        self.feature_seconds = 0.0
        self._sample: Sample | None = None

    @property
    def sample(self) -> Sample:
        if self._sample is None:
            raise PredictorError(f"{self.name}: predict before prepare")
        return self._sample

    def prepare(self, sample: Sample):
        start = time.perf_counter()
        self._sample = sample
        self._prepare(sample)
        self.feature_seconds = time.perf_counter() - start

    def predict(self, request: PredictRequest) -> PredictResponse:
        start = time.perf_counter()
        probabilities = self._predict(request)
        elapsed = time.perf_counter() - start
        probabilities = np.asarray(probabilities, dtype=np.float32)
        if probabilities.shape != request.prev_mask.shape:
            raise PredictorError(
                f"{self.name}: probability map is {probabilities.shape}, "
                f"expected {request.prev_mask.shape}"
            )
        if probabilities.size and (probabilities.min() < 0.0 or probabilities.max() > 1.0):
            raise PredictorError(f"{self.name}: probabilities outside [0, 1]")
        return PredictResponse(probabilities, click_seconds=elapsed)

    def close(self):
        """Release external resources; default is a no-op."""

    # --- backend hooks ---

    def _prepare(self, sample: Sample):
        raise NotImplementedError

    def _predict(self, request: PredictRequest) -> np.ndarray:
        raise NotImplementedError
