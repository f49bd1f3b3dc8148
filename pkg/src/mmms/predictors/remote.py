"""Predictor backed by an external child process speaking the JSON protocol.

Session layout over the child's stdin/stdout, one JSON object per line:

    -> {"type": "hello", "resolution": [H, W], "modalities": ["depth", ...]}
    <- {"type": "ready"}
    -> {"type": "prepare", "image_id": ID, "tensors": {"rgb": RASTER, ...}}
    <- {"type": "prepared"}
    -> {"type": "predict", "image_id": ID, "clicks": [...], "prev_mask": RLE}
    <- {"type": "mask", "mask": RLE}

The child may answer any request with {"type": "error", "message": ...},
which aborts the current run. Timeouts, child exits, and protocol
violations raise distinct error types; a crashed child is restarted once
(with a fresh handshake and re-prepare) before the run is declared failed.
"""
from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading

import numpy as np

from ..dataset import Sample
from ..errors import RemoteExitError, RemoteProtocolError, RemoteTimeoutError
from .base import Predictor, PredictRequest
from .wire import mask_reply_from_json, predict_to_json, raster_to_json

DEFAULT_TIMEOUT = 10.0


class RemotePredictor(Predictor):
    name = "remote"

    def __init__(self, command: str | list[str], timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._child: subprocess.Popen | None = None
        self._lines: queue.Queue | None = None

    # --- child lifecycle ---

    def _start(self, sample: Sample):
        self._child = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        lines: queue.Queue = queue.Queue()

        def pump(stream, sink):
            for line in stream:
                sink.put(line)
            sink.put(None)  # EOF marker

        threading.Thread(target=pump, args=(self._child.stdout, lines), daemon=True).start()
        self._lines = lines
        self._request(
            {
                "type": "hello",
                "resolution": [sample.height, sample.width],
                "modalities": sorted(sample.modalities),
            },
            expect="ready",
        )

    def _alive(self) -> bool:
        return self._child is not None and self._child.poll() is None

    def close(self):
        if self._child is not None:
            try:
                self._child.stdin.close()
            except OSError:
                pass
            try:
                self._child.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._child.kill()
            self._child = None

    def _kill(self):
        if self._child is not None:
            self._child.kill()
            self._child.wait()
            self._child = None

    # --- protocol ---

    def _request(self, message: dict, expect: str) -> dict:
        try:
            self._child.stdin.write(json.dumps(message) + "\n")
            self._child.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise RemoteExitError(f"child pipe closed while sending {message['type']}: {exc}")
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()  # the child is wedged; do not reuse its pipes
            raise RemoteTimeoutError(
                f"no reply to {message['type']!r} within {self.timeout:g}s"
            )
        if line is None:
            code = self._child.poll()
            self._child = None
            raise RemoteExitError(f"child exited (code {code}) while awaiting {expect!r}")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RemoteProtocolError(f"reply is not valid JSON: {exc}", line.rstrip())
        kind = reply.get("type")
        if kind == "error":
            raise RemoteProtocolError(
                f"child reported error: {reply.get('message', '')}", line.rstrip()
            )
        if kind != expect:
            raise RemoteProtocolError(
                f"expected message type {expect!r}, got {kind!r}", line.rstrip()
            )
        return reply

    def _send_prepare(self, sample: Sample):
        tensors = {"rgb": raster_to_json(sample.rgb)}
        for name, values in sample.modalities.items():
            quantized = (np.clip(values, 0.0, 1.0) * 65535).round().astype(np.uint16)
            tensors[name] = raster_to_json(quantized)
        self._request(
            {"type": "prepare", "image_id": sample.image_id, "tensors": tensors},
            expect="prepared",
        )

    def _prepare(self, sample: Sample):
        if not self._alive():
            self.close()
            self._start(sample)
        self._send_prepare(sample)

    def _predict(self, request: PredictRequest) -> np.ndarray:
        message = predict_to_json(self.sample.image_id, request.clicks, request.prev_mask)
        try:
            reply = self._request(message, expect="mask")
        except RemoteExitError:
            # One restart after a crash: fresh handshake, re-prepare, retry.
            self.close()
            self._start(self.sample)
            self._send_prepare(self.sample)
            reply = self._request(message, expect="mask")
        mask = mask_reply_from_json(reply)
        if mask.shape != request.prev_mask.shape:
            raise RemoteProtocolError(
                f"child mask is {mask.shape}, expected {request.prev_mask.shape}"
            )
        return mask.data.astype(np.float32)
