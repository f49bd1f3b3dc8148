"""Pluggable predictor backends.

Spec strings understood by the factory:
    classical          geodesic multi-modal segmenter
    oracle:FILE        scripted masks from a JSON file
    neural[:SEED]      forward-only network, seeded random weights
    remote:CMD         external child process speaking the wire protocol
"""
from __future__ import annotations

from typing import Callable

from ..errors import ConfigError
from .base import Predictor, PredictRequest, PredictResponse
from .classical import ClassicalPredictor
from .oracle import OraclePredictor
from .remote import RemotePredictor

__all__ = [
    "Predictor",
    "PredictRequest",
    "PredictResponse",
    "ClassicalPredictor",
    "OraclePredictor",
    "RemotePredictor",
    "predictor_factory",
]


def predictor_factory(
    spec: str,
    *,
    resolution: int | None = None,
    features_dir: str | None = None,
    timeout: float | None = None,
    disk_radius: float | None = None,
) -> Callable[[], Predictor]:
    """Build a zero-argument factory for the given predictor spec string."""
    kind, _, argument = spec.partition(":")
    if kind == "classical":
        return ClassicalPredictor
    if kind == "oracle":
        if not argument:
            raise ConfigError("oracle predictor needs a script file: oracle:FILE")
        return lambda: OraclePredictor.from_file(argument)
    if kind == "remote":
        if not argument:
            raise ConfigError("remote predictor needs a command: remote:CMD")
        kwargs = {} if timeout is None else {"timeout": timeout}
        return lambda: RemotePredictor(argument, **kwargs)
    if kind == "neural":
        from .neural import NeuralPredictor

        seed = int(argument) if argument else 0
        kwargs = {}
        if resolution is not None:
            kwargs["resolution"] = resolution
        if features_dir is not None:
            kwargs["features_dir"] = features_dir
        if disk_radius is not None:
            kwargs["disk_radius"] = disk_radius
        return lambda: NeuralPredictor(seed=seed, **kwargs)
    raise ConfigError(f"unknown predictor spec {spec!r}")
