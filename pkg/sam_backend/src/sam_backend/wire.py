"""Wire protocol v1 payload handling for the backend side.

Requests carry a [0, 1]-normalized image ("f32le-base64" or "png-base64",
row-major, top-left origin), an ordered prompt list with labels 1
(foreground) / 0 (background), and a mode ("binary" | "multilabel").
Responses carry a label raster ("u8le-base64" or "png-base64"),
elapsed_ms, and a backend label; failures carry {"error": {code, message}}
and never a partial success body.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

F32LE = "f32le-base64"
U8LE = "u8le-base64"
PNG = "png-base64"

BINARY = "binary"
MULTILABEL = "multilabel"

PROTOCOL_PATH = "/v1/segment"


class ProtocolError(Exception):
    """Client-side protocol violation; maps to a 4xx error body."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class ParsedRequest:
    image: np.ndarray  # float32 (h, w)
    prompts: tuple[tuple[int, int, int], ...]  # (x, y, label)
    mode: str


def error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def _unb64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (ValueError, TypeError) as e:
        raise ProtocolError("bad_image", f"{what}: bad base64 payload: {e}") from e


def decode_image(doc) -> np.ndarray:
    if not isinstance(doc, dict):
        raise ProtocolError("bad_image", "image must be an object")
    try:
        w = int(doc["width"])
        h = int(doc["height"])
        encoding = doc["encoding"]
        data = doc["data"]
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError("bad_image", f"image missing field: {e}") from e
    if w < 1 or h < 1 or not isinstance(data, str):
        raise ProtocolError("bad_image", "image has invalid fields")
    if encoding == F32LE:
        raw = _unb64(data, "image")
        if len(raw) != w * h * 4:
            raise ProtocolError(
                "bad_image", f"image payload is {len(raw)} bytes, expected {w * h * 4}"
            )
        return np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float32)
    if encoding == PNG:
        try:
            img = PILImage.open(io.BytesIO(_unb64(data, "image")))
            img.load()
        except ProtocolError:
            raise
        except Exception as e:
            raise ProtocolError("bad_image", f"undecodable PNG payload: {e}") from e
        if img.mode != "L":
            raise ProtocolError("bad_image", f"image PNG must be mode L, got {img.mode}")
        arr = np.asarray(img)
        if arr.shape != (h, w):
            raise ProtocolError(
                "bad_image",
                f"PNG is {arr.shape[1]}x{arr.shape[0]}, payload declares {w}x{h}",
            )
        return arr.astype(np.float32) / 255.0
    raise ProtocolError("bad_image", f"unknown image encoding {encoding!r}")


def encode_mask(labels: np.ndarray, encoding: str = U8LE) -> dict:
    h, w = labels.shape
    if encoding == U8LE:
        if labels.max(initial=0) > 255:
            encoding = PNG  # never emit a lossy/overflowing success body
        else:
            data = base64.b64encode(
                np.ascontiguousarray(labels, dtype=np.uint8).tobytes()
            ).decode("ascii")
            return {"width": w, "height": h, "encoding": U8LE, "data": data}
    if encoding != PNG:
        raise ValueError(f"unknown mask encoding {encoding!r}")
    buf = io.BytesIO()
    if labels.max(initial=0) <= 255:
        img = PILImage.frombytes("L", (w, h), labels.astype(np.uint8).tobytes())
    else:
        img = PILImage.frombytes("I;16", (w, h), labels.astype("<u2").tobytes())
    img.save(buf, format="PNG")
    return {"width": w, "height": h, "encoding": PNG,
            "data": base64.b64encode(buf.getvalue()).decode("ascii")}


def parse_request(doc) -> ParsedRequest:
    """Validate a /v1/segment body; raises ProtocolError on any violation."""
    if not isinstance(doc, dict):
        raise ProtocolError("bad_request", "request body must be an object")
    for field in ("image", "prompts", "mode"):
        if field not in doc:
            raise ProtocolError("bad_request", f"request missing field {field!r}")
    image = decode_image(doc["image"])
    h, w = image.shape

    raw_prompts = doc["prompts"]
    if not isinstance(raw_prompts, list):
        raise ProtocolError("bad_prompt", "prompts must be an array")
    prompts = []
    for i, p in enumerate(raw_prompts):
        if not isinstance(p, dict):
            raise ProtocolError("bad_prompt", f"prompt {i} must be an object")
        try:
            x, y, label = int(p["x"]), int(p["y"]), int(p["label"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError("bad_prompt", f"prompt {i} missing field: {e}") from e
        if label not in (0, 1):
            raise ProtocolError("bad_prompt", f"prompt {i} label must be 0 or 1")
        if not (0 <= x < w and 0 <= y < h):
            raise ProtocolError(
                "bad_prompt", f"prompt {i} at ({x}, {y}) outside {w}x{h} image"
            )
        prompts.append((x, y, label))
    if not any(label == 1 for _, _, label in prompts):
        raise ProtocolError("bad_prompt", "need at least one foreground prompt")

    mode = doc["mode"]
    if mode not in (BINARY, MULTILABEL):
        raise ProtocolError("bad_mode", f"mode must be binary or multilabel, got {mode!r}")
    return ParsedRequest(image=image, prompts=tuple(prompts), mode=mode)
