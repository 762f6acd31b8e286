"""Segmentation wire protocol v1: request/response bodies for
POST /v1/segment, shared by the remote-segmentation client and the
service's own segmentation endpoint.

Rasters travel row-major, top-left origin, base64 (standard alphabet,
padded). Images are |value| min-max rescaled to [0, 1] before encoding;
masks are label rasters. Encodings: images "f32le-base64" or
"png-base64" (8-bit, lossy); masks "u8le-base64" or "png-base64".
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image as PILImage

from .core import BINARY, MULTILABEL, Image2D, ImageGrid, LabelMask
from .errors import MalformedResponseError, MaskDimensionMismatchError, MaskLabelError

F32LE = "f32le-base64"
U8LE = "u8le-base64"
PNG = "png-base64"

PROTOCOL_PATH = "/v1/segment"


def transport_normalize(data: np.ndarray) -> np.ndarray:
    """|values| min-max rescaled to [0, 1]; a constant image maps to zeros."""
    mag = np.abs(np.asarray(data, dtype=np.float32))
    lo, hi = float(mag.min()), float(mag.max())
    if hi <= lo:
        return np.zeros_like(mag, dtype=np.float32)
    return ((mag - lo) / (hi - lo)).astype(np.float32)


def _b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def _unb64(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (ValueError, TypeError) as e:
        raise MalformedResponseError(f"bad base64 payload: {e}") from e


def encode_image(norm: np.ndarray, encoding: str = F32LE) -> dict:
    """Encode a [0,1] float raster for transport."""
    h, w = norm.shape
    if encoding == F32LE:
        data = _b64(np.ascontiguousarray(norm, dtype="<f4").tobytes())
    elif encoding == PNG:
        u8 = np.clip(np.rint(norm * 255.0), 0, 255).astype(np.uint8)
        buf = io.BytesIO()
        PILImage.frombytes("L", (w, h), u8.tobytes()).save(buf, format="PNG")
        data = _b64(buf.getvalue())
    else:
        raise ValueError(f"unknown image encoding {encoding!r}")
    return {"width": w, "height": h, "encoding": encoding, "data": data}


def decode_image(doc: dict) -> np.ndarray:
    """Decode an image payload to a float32 (h, w) array."""
    w, h, encoding, data = _raster_fields(doc)
    if encoding == F32LE:
        raw = _unb64(data)
        if len(raw) != w * h * 4:
            raise MalformedResponseError(
                f"image payload is {len(raw)} bytes, expected {w * h * 4}"
            )
        return np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float32)
    if encoding == PNG:
        arr = _decode_png(data, w, h)
        return (arr.astype(np.float32) / 255.0)
    raise MalformedResponseError(f"unknown image encoding {encoding!r}")


def encode_mask(labels: np.ndarray, encoding: str = U8LE) -> dict:
    """Encode a label raster for transport."""
    h, w = labels.shape
    if encoding == U8LE:
        if labels.max(initial=0) > 255:
            raise ValueError("labels exceed u8 range; use png-base64")
        data = _b64(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())
    elif encoding == PNG:
        buf = io.BytesIO()
        if labels.max(initial=0) <= 255:
            img = PILImage.frombytes("L", (w, h), labels.astype(np.uint8).tobytes())
        else:
            img = PILImage.frombytes("I;16", (w, h), labels.astype("<u2").tobytes())
        img.save(buf, format="PNG")
        data = _b64(buf.getvalue())
    else:
        raise ValueError(f"unknown mask encoding {encoding!r}")
    return {"width": w, "height": h, "encoding": encoding, "data": data}


def decode_mask(doc: dict) -> np.ndarray:
    """Decode a mask payload to an int32 (h, w) label array."""
    w, h, encoding, data = _raster_fields(doc)
    if encoding == U8LE:
        raw = _unb64(data)
        if len(raw) != w * h:
            raise MalformedResponseError(
                f"mask payload is {len(raw)} bytes, expected {w * h}"
            )
        return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).astype(np.int32)
    if encoding == PNG:
        return _decode_png(data, w, h).astype(np.int32)
    raise MalformedResponseError(f"unknown mask encoding {encoding!r}")


def _decode_png(data: str, w: int, h: int) -> np.ndarray:
    try:
        img = PILImage.open(io.BytesIO(_unb64(data)))
        img.load()
    except Exception as e:
        raise MalformedResponseError(f"undecodable PNG payload: {e}") from e
    if img.mode not in ("L", "I;16", "I"):
        raise MalformedResponseError(f"PNG must be grayscale, got mode {img.mode}")
    arr = np.asarray(img)
    if arr.shape != (h, w):
        raise MalformedResponseError(
            f"PNG is {arr.shape[1]}x{arr.shape[0]}, payload declares {w}x{h}"
        )
    return arr


def _raster_fields(doc):
    if not isinstance(doc, dict):
        raise MalformedResponseError("raster payload must be an object")
    try:
        w = int(doc["width"])
        h = int(doc["height"])
        encoding = doc["encoding"]
        data = doc["data"]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedResponseError(f"raster payload missing field: {e}") from e
    if w < 1 or h < 1 or not isinstance(data, str):
        raise MalformedResponseError("raster payload has invalid fields")
    return w, h, encoding, data


def build_segment_request(image: Image2D, prompts, mode: str = BINARY,
                          encoding: str = F32LE) -> dict:
    """Assemble the POST /v1/segment body for an image + prompt list."""
    if mode not in (BINARY, MULTILABEL):
        raise ValueError(f"mode must be binary or multilabel, got {mode!r}")
    return {
        "image": encode_image(transport_normalize(image.data), encoding),
        "prompts": [{"x": int(p.x_px), "y": int(p.y_px), "label": int(p.label)}
                    for p in prompts],
        "mode": mode,
    }


def parse_segment_response(doc, grid: ImageGrid, mode: str = BINARY):
    """Validate and decode a segmentation response against the request grid.

    Returns (LabelMask, elapsed_ms, backend). Raises
    MalformedResponseError on schema violations and
    MaskDimensionMismatchError when the mask does not match the grid.
    """
    if not isinstance(doc, dict) or "mask" not in doc:
        raise MalformedResponseError("response has no mask field")
    elapsed = doc.get("elapsed_ms")
    backend = doc.get("backend")
    if not isinstance(elapsed, (int, float)) or isinstance(elapsed, bool):
        raise MalformedResponseError("elapsed_ms must be a number")
    if not isinstance(backend, str):
        raise MalformedResponseError("backend must be a string")
    labels = decode_mask(doc["mask"])
    if labels.shape != grid.shape:
        raise MaskDimensionMismatchError(
            f"mask is {labels.shape[1]}x{labels.shape[0]}, "
            f"image is {grid.width_px}x{grid.height_px}"
        )
    try:
        mask = LabelMask(grid=grid, labels=labels, kind=mode)
    except MaskLabelError as e:
        raise MalformedResponseError(f"mask violates {mode} labeling: {e}") from e
    return mask, float(elapsed), backend


def error_body(code: str, message: str) -> dict:
    """Protocol error envelope for non-success responses."""
    return {"error": {"code": code, "message": message}}
