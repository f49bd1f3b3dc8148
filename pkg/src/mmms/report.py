"""Evaluation report container, serialization, and latency accounting.

Timing lives in its own sub-object so determinism checks can compare two
reports byte-for-byte after dropping the `timing` key.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = "1.0"


@dataclass
class EvalReport:
    mode: str  # "single" | "multi"
    theta_iou: float
    theta_avg: float | None
    n_max: int
    metrics: dict[str, float]
    images: int
    surfaces_total: int
    surfaces_failed: int
    revisit_total: int = 0
    fingerprints: dict[str, str] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        if not self.fingerprints.get("dataset") or not self.fingerprints.get("predictor"):
            raise ValueError("report fingerprints must be non-empty")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "theta_iou": self.theta_iou,
            "theta_avg": self.theta_avg,
            "n_max": self.n_max,
            "metrics": self.metrics,
            "images": self.images,
            "surfaces_total": self.surfaces_total,
            "surfaces_failed": self.surfaces_failed,
            "revisit_total": self.revisit_total,
            "fingerprints": self.fingerprints,
            "errors": self.errors,
            "timing": self.timing,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name in sorted(self.metrics):
            writer.writerow([name, f"{self.metrics[name]:.6f}"])
        return buffer.getvalue()


def compute_timing(total_clicks: int, feature_seconds: float, click_seconds: float) -> dict[str, float]:
    """Per-click latency, both amortized (feature time folded in) and isolated."""
    timing = {
        "clicks": float(total_clicks),
        "feature_seconds": feature_seconds,
        "click_seconds": click_seconds,
    }
    if total_clicks > 0:
        timing["amortized_ms_per_click"] = 1000.0 * (feature_seconds + click_seconds) / total_clicks
        timing["isolated_ms_per_click"] = 1000.0 * click_seconds / total_clicks
    else:
        timing["amortized_ms_per_click"] = 0.0
        timing["isolated_ms_per_click"] = 0.0
    return timing


def emit(report: EvalReport, path: str | Path, fmt: str | None = None) -> Path:
    """Write the report as JSON (full fidelity) or CSV (one row per metric)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "json"
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = report.to_json() if fmt == "json" else report.to_csv()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def parse_report(text: str) -> EvalReport:
    """Decode a JSON report, rejecting unknown major schema versions."""
    raw = json.loads(text)
    version = str(raw.get("schema_version", ""))
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise ValueError(f"unsupported report schema version {version!r}")
    return EvalReport(
        mode=raw["mode"],
        theta_iou=raw["theta_iou"],
        theta_avg=raw.get("theta_avg"),
        n_max=raw["n_max"],
        metrics=dict(raw["metrics"]),
        images=raw["images"],
        surfaces_total=raw["surfaces_total"],
        surfaces_failed=raw["surfaces_failed"],
        revisit_total=raw.get("revisit_total", 0),
        fingerprints=dict(raw["fingerprints"]),
        timing=dict(raw.get("timing", {})),
        errors=dict(raw.get("errors", {})),
        schema_version=version,
    )


REPORT_JSON_SCHEMA = {
    "type": "object",
    "required": [
        "schema_version", "mode", "theta_iou", "n_max", "metrics",
        "images", "surfaces_total", "surfaces_failed", "fingerprints", "timing",
    ],
    "properties": {
        "schema_version": {"type": "string"},
        "mode": {"enum": ["single", "multi"]},
        "theta_iou": {"type": "number"},
        "theta_avg": {"type": ["number", "null"]},
        "n_max": {"type": "integer", "minimum": 1},
        "metrics": {"type": "object", "additionalProperties": {"type": "number"}},
        "images": {"type": "integer", "minimum": 0},
        "surfaces_total": {"type": "integer", "minimum": 0},
        "surfaces_failed": {"type": "integer", "minimum": 0},
        "revisit_total": {"type": "integer", "minimum": 0},
        "fingerprints": {
            "type": "object",
            "required": ["dataset", "predictor", "config"],
            "additionalProperties": {"type": "string"},
        },
        "errors": {"type": "object", "additionalProperties": {"type": "string"}},
        "timing": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}
