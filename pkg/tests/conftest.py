"""Shared fixtures: synthetic rasters, a stub wire-protocol backend, and
the protocol JSON schemas used for conformance checks."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from patk.core import Image2D, ImageGrid
from patk.protocol import decode_image, encode_mask


def make_grid(width=200, height=200, pitch=0.1, origin_x=None, origin_y=None):
    if origin_x is None:
        origin_x = -pitch * (width - 1) / 2
    if origin_y is None:
        origin_y = -pitch * (height - 1) / 2
    return ImageGrid(origin_x_mm=origin_x, origin_y_mm=origin_y, pitch_mm=pitch,
                     width_px=width, height_px=height)


def disk_image(grid, cx_px, cy_px, r_px, amp=1.0, background=0.0):
    ys, xs = np.indices(grid.shape)
    disk = (xs - cx_px) ** 2 + (ys - cy_px) ** 2 <= r_px ** 2
    data = np.full(grid.shape, background, dtype=np.float32)
    data[disk] = amp
    return Image2D(grid=grid, data=data), disk


def iou(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(bool)
    b = b.astype(bool)
    union = (a | b).sum()
    return float((a & b).sum() / union) if union else 1.0


@pytest.fixture
def grid200():
    return make_grid(200, 200)


RASTER_ENCODINGS_IMAGE = ["f32le-base64", "png-base64"]
RASTER_ENCODINGS_MASK = ["u8le-base64", "png-base64"]

REQUEST_SCHEMA = {
    "type": "object",
    "required": ["image", "prompts", "mode"],
    "properties": {
        "image": {
            "type": "object",
            "required": ["width", "height", "encoding", "data"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
                "encoding": {"enum": RASTER_ENCODINGS_IMAGE},
                "data": {"type": "string"},
            },
        },
        "prompts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["x", "y", "label"],
                "properties": {
                    "x": {"type": "integer", "minimum": 0},
                    "y": {"type": "integer", "minimum": 0},
                    "label": {"enum": [0, 1]},
                },
            },
        },
        "mode": {"enum": ["binary", "multilabel"]},
    },
}

RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["mask", "elapsed_ms", "backend"],
    "properties": {
        "mask": {
            "type": "object",
            "required": ["width", "height", "encoding", "data"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
                "encoding": {"enum": RASTER_ENCODINGS_MASK},
                "data": {"type": "string"},
            },
        },
        "elapsed_ms": {"type": "number"},
        "backend": {"type": "string"},
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error"],
    "properties": {
        "error": {
            "type": "object",
            "required": ["code", "message"],
            "properties": {
                "code": {"type": "string"},
                "message": {"type": "string"},
            },
        },
    },
}


@pytest.fixture(scope="session")
def protocol_schemas():
    return {"request": REQUEST_SCHEMA, "response": RESPONSE_SCHEMA,
            "error": ERROR_SCHEMA}


def default_responder(doc):
    """Threshold the transported image at 0.5; a well-formed stub backend."""
    img = decode_image(doc["image"])
    labels = (img >= 0.5).astype(np.int32)
    return 200, {
        "mask": encode_mask(labels),
        "elapsed_ms": 1.5,
        "backend": "stub-test",
    }


class StubBackend:
    """In-process wire-protocol server; tests swap `responder` per case.

    A responder returns (status, body_dict) for JSON replies, or
    (status, raw_bytes, content_type) to exercise malformed responses.
    """

    def __init__(self):
        backend = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                if self.path != "/v1/segment":
                    self.send_response(404)
                    self.end_headers()
                    return
                doc = json.loads(raw.decode("utf-8"))
                backend.requests.append(doc)
                result = backend.responder(doc)
                if len(result) == 3:
                    status, body, ctype = result
                else:
                    status, body = result
                    body = json.dumps(body).encode("utf-8")
                    ctype = "application/json"
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.requests = []
        self.responder = default_responder
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_backend():
    backend = StubBackend()
    yield backend
    backend.close()
