"""Shared fixtures: a stub-mode test client plus the wire protocol JSON
schemas for conformance checks."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sam_backend.server import create_app

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
                "encoding": {"enum": ["u8le-base64", "png-base64"]},
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


@pytest.fixture
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def f32_image(data: np.ndarray) -> dict:
    h, w = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    return {"width": w, "height": h, "encoding": "f32le-base64",
            "data": base64.b64encode(payload).decode("ascii")}


def segment_body(data, prompts, mode="binary"):
    return {"image": f32_image(np.asarray(data, dtype=np.float32)),
            "prompts": [{"x": x, "y": y, "label": lb} for x, y, lb in prompts],
            "mode": mode}


def decode_u8_mask(doc: dict) -> np.ndarray:
    assert doc["encoding"] == "u8le-base64"
    raw = base64.b64decode(doc["data"], validate=True)
    assert len(raw) == doc["width"] * doc["height"]
    return np.frombuffer(raw, dtype=np.uint8).reshape(
        doc["height"], doc["width"]).astype(np.int32)
