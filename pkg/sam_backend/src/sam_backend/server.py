"""FastAPI server for wire protocol v1.

One inference runs at a time per process; concurrent requests queue FIFO
and time out with a 503 after a configurable wait. elapsed_ms covers
inference only, not payload decode/encode.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from contextlib import contextmanager

import numpy as np
from fastapi import Body, FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .predictors import StubPredictor
from .wire import (
    BINARY,
    PROTOCOL_PATH,
    ProtocolError,
    encode_mask,
    error_body,
    parse_request,
)


class QueueTimeoutError(Exception):
    pass


class FifoGate:
    """Grants turns strictly in arrival order; a waiter that times out
    leaves the queue without blocking those behind it."""

    def __init__(self, timeout_s: float = 30.0):
        self.timeout_s = timeout_s
        self._lock = threading.Lock()
        self._queue: deque[threading.Event] = deque()

    @contextmanager
    def turn(self):
        me = threading.Event()
        with self._lock:
            self._queue.append(me)
            if len(self._queue) == 1:
                me.set()
        granted = me.wait(self.timeout_s)
        if not granted:
            with self._lock:
                if me.is_set():  # baton arrived as the wait expired
                    granted = True
                else:
                    self._queue.remove(me)
        if not granted:
            raise QueueTimeoutError(
                f"inference queue wait exceeded {self.timeout_s}s")
        try:
            yield
        finally:
            with self._lock:
                self._queue.popleft()  # this waiter holds the head slot
                if self._queue:
                    self._queue[0].set()


def run_inference(predictor, parsed):
    """Compose the mode semantics on top of single-prompt-set predictions.

    Returns (labels int32 (h, w), elapsed_ms). Multilabel: one prediction
    per foreground prompt (each paired with every background prompt),
    pixel overlaps go to the higher score, labels renumbered densely in
    prompt order over the surviving regions.
    """
    points = [(x, y) for x, y, _ in parsed.prompts]
    labels = [label for _, _, label in parsed.prompts]
    if parsed.mode == BINARY:
        start = time.perf_counter()
        mask, _ = predictor.predict(parsed.image, points, labels)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return mask.astype(np.int32), elapsed_ms

    bg = [(x, y) for x, y, label in parsed.prompts if label == 0]
    fg = [(x, y) for x, y, label in parsed.prompts if label == 1]
    score_map = np.full(parsed.image.shape, -np.inf, dtype=np.float64)
    claim = np.zeros(parsed.image.shape, dtype=np.int32)
    elapsed_ms = 0.0
    for i, point in enumerate(fg, start=1):
        pts = [point] + bg
        lbs = [1] + [0] * len(bg)
        start = time.perf_counter()
        mask, score = predictor.predict(parsed.image, pts, lbs)
        elapsed_ms += (time.perf_counter() - start) * 1000.0
        wins = mask & (score > score_map)
        claim[wins] = i
        score_map[wins] = score
    dense = np.zeros_like(claim)
    next_label = 0
    for i in range(1, len(fg) + 1):
        region = claim == i
        if region.any():
            next_label += 1
            dense[region] = next_label
    return dense, elapsed_ms


def create_app(predictor=None, queue_timeout_s: float = 30.0) -> FastAPI:
    if predictor is None:
        predictor = StubPredictor()
    app = FastAPI(title="segmentation backend", version="1")
    gate = FifoGate(queue_timeout_s)

    @app.exception_handler(ProtocolError)
    async def protocol_error(_, exc: ProtocolError):
        return JSONResponse(status_code=400,
                            content=error_body(exc.code, exc.message))

    @app.exception_handler(RequestValidationError)
    async def invalid_body(_, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content=error_body("bad_request",
                                               "body is not a JSON object"))

    @app.exception_handler(QueueTimeoutError)
    async def queue_timeout(_, exc: QueueTimeoutError):
        return JSONResponse(status_code=503,
                            content=error_body("queue_timeout", str(exc)))

    @app.exception_handler(Exception)
    async def inference_failure(_, exc: Exception):
        return JSONResponse(status_code=500,
                            content=error_body("inference_failed", str(exc)))

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "backend": predictor.backend_label}

    # Sync endpoint: requests run on the threadpool, so FIFO waits do not
    # stall the event loop.
    @app.post(PROTOCOL_PATH)
    def segment(doc: dict = Body(...)):
        parsed = parse_request(doc)
        with gate.turn():
            labels, elapsed_ms = run_inference(predictor, parsed)
        return {
            "mask": encode_mask(labels),
            "elapsed_ms": elapsed_ms,
            "backend": predictor.backend_label,
        }

    return app
