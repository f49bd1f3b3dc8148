"""Deterministic multi-modal click segmenter based on geodesic labeling.

Each pixel carries a feature vector of normalized RGB plus all modality
channels. Neighboring pixels are connected with an edge costing the
Euclidean feature difference plus a small epsilon (which keeps the graph
connected on uniform images). A pixel takes the polarity of its
geodesically nearest click seed, positives winning ties; without negative
clicks, pixels farther than tau_bg times the maximum observed distance
stay background.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..dataset import Sample
from ..errors import PredictorError
from .base import Predictor, PredictRequest


class ClassicalPredictor(Predictor):
    name = "classical"

    def __init__(self, epsilon: float = 1e-3, tau_bg: float = 0.25):
        super().__init__()
        if epsilon <= 0:
            raise PredictorError("epsilon must be positive to keep the pixel graph connected")
        self.epsilon = epsilon
        self.tau_bg = tau_bg
        self._graph = None
        self._shape: tuple[int, int] | None = None

    def _prepare(self, sample: Sample):
        feats = [sample.rgb.astype(np.float32) / 255.0]
        feats += [sample.modalities[name] for name in sorted(sample.modalities)]
        grid = np.concatenate(feats, axis=2)
        h, w = grid.shape[:2]
        nodes = np.arange(h * w).reshape(h, w)

        right = np.linalg.norm(grid[:, 1:] - grid[:, :-1], axis=2) + self.epsilon
        down = np.linalg.norm(grid[1:, :] - grid[:-1, :], axis=2) + self.epsilon
        rows = np.concatenate([nodes[:, :-1].ravel(), nodes[:-1, :].ravel()])
        cols = np.concatenate([nodes[:, 1:].ravel(), nodes[1:, :].ravel()])
        weights = np.concatenate([right.ravel(), down.ravel()])

        self._graph = coo_matrix((weights, (rows, cols)), shape=(h * w, h * w)).tocsr()
        self._shape = (h, w)

    def _predict(self, request: PredictRequest) -> np.ndarray:
        if self._graph is None:
            raise PredictorError("classical: predict before prepare")
        h, w = self._shape
        if request.prev_mask.shape != (h, w):
            raise PredictorError(
                f"classical: request is {request.prev_mask.shape}, prepared image is {(h, w)}"
            )
        positive = [c.row * w + c.col for c in request.clicks if c.positive]
        negative = [c.row * w + c.col for c in request.clicks if not c.positive]
        if not positive:
            raise PredictorError("classical: at least one positive click required")

        dist_pos = dijkstra(self._graph, directed=False, indices=positive, min_only=True)
        if negative:
            dist_neg = dijkstra(self._graph, directed=False, indices=negative, min_only=True)
            foreground = dist_pos <= dist_neg  # positive wins exact ties
        else:
            foreground = dist_pos <= self.tau_bg * dist_pos.max()
        return foreground.reshape(h, w).astype(np.float32)
