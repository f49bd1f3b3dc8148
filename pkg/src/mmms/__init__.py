"""Click-based interactive segmentation benchmark for multi-surface, multi-modal images."""

__version__ = "0.1.0"
