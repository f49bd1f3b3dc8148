"""Reference child process for the remote predictor protocol.

Answers every predict with the previous mask unchanged. Deliberately
self-contained (stdlib only) so it can serve as a template for wiring real
models into the benchmark: replace `predict` with actual inference.

Run with: python -m mmms.predictors.echo_child
"""
from __future__ import annotations

import json
import sys


def predict(state: dict, message: dict) -> dict:
    mask = message["prev_mask"]
    total = sum(mask["counts"])
    if total != mask["h"] * mask["w"]:
        return {"type": "error", "message": f"prev_mask counts sum to {total}"}
    return {"type": "mask", "mask": mask}


def main() -> int:
    state: dict = {}
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            reply = {"type": "error", "message": f"bad JSON: {exc}"}
        else:
            kind = message.get("type")
            if kind == "hello":
                state["resolution"] = message.get("resolution")
                state["modalities"] = message.get("modalities", [])
                reply = {"type": "ready"}
            elif kind == "prepare":
                state["image_id"] = message.get("image_id")
                reply = {"type": "prepared"}
            elif kind == "predict":
                reply = predict(state, message)
            else:
                reply = {"type": "error", "message": f"unknown message type {kind!r}"}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
