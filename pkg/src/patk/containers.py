"""File container for channel data, images, and masks.

Binary layout (little-endian throughout):

* bytes 0-3: magic ``PAZ1``
* bytes 4-7: u32 header length H
* bytes 8..8+H: UTF-8 JSON header (kind, dims, dtype, per-kind metadata)
* remainder: raw row-major payload

Images and channel data are stored as f32, masks as u16.  Masks are
additionally accepted and emitted as 8/16-bit grayscale PNG with a JSON
sidecar carrying the grid, for interoperability with image viewers.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BINARY, MULTILABEL, ChannelData, Image2D, ImageGrid, LabelMask
from .errors import (
    BadMagicError,
    HeaderError,
    NonFiniteValueError,
    PayloadSizeMismatchError,
    TruncatedPayloadError,
)

MAGIC = b"PAZ1"
_PNG_MAGIC = b"\x89PNG"

_DTYPES = {"f32": np.dtype("<f4"), "u16": np.dtype("<u2")}


def _grid_header(grid: ImageGrid) -> dict:
    return {
        "origin_x_mm": grid.origin_x_mm,
        "origin_y_mm": grid.origin_y_mm,
        "pitch_mm": grid.pitch_mm,
    }


def _grid_from_header(h: dict, dims) -> ImageGrid:
    try:
        g = h["grid"]
        return ImageGrid(
            origin_x_mm=float(g["origin_x_mm"]),
            origin_y_mm=float(g["origin_y_mm"]),
            pitch_mm=float(g["pitch_mm"]),
            width_px=int(dims[1]),
            height_px=int(dims[0]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise HeaderError(f"bad grid metadata: {e}") from e


def _header_and_payload(obj, geometry_descriptor=None):
    if isinstance(obj, ChannelData):
        header = {
            "kind": "channels",
            "dtype": "f32",
            "dims": [obj.n_channels, obj.n_samples],
            "fs_hz": obj.fs_hz,
            "t0_s": obj.t0_s,
        }
        if geometry_descriptor:
            header["geometry"] = geometry_descriptor
        return header, np.ascontiguousarray(obj.samples, dtype="<f4")
    if isinstance(obj, Image2D):
        header = {
            "kind": "image",
            "dtype": "f32",
            "dims": list(obj.grid.shape),
            "grid": _grid_header(obj.grid),
        }
        return header, np.ascontiguousarray(obj.data, dtype="<f4")
    if isinstance(obj, LabelMask):
        if obj.labels.max(initial=0) > np.iinfo(np.uint16).max:
            raise ValueError("mask labels exceed u16 range")
        header = {
            "kind": "mask",
            "dtype": "u16",
            "dims": list(obj.grid.shape),
            "grid": _grid_header(obj.grid),
            "mask_kind": obj.kind,
        }
        return header, np.ascontiguousarray(obj.labels, dtype="<u2")
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_container(obj, path, geometry_descriptor=None):
    """Write a ChannelData, Image2D, or LabelMask to *path*.

    A ``.png`` path selects the PNG + JSON-sidecar form (masks only);
    any other path selects the binary container.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        if not isinstance(obj, LabelMask):
            raise TypeError("PNG output is supported for masks only")
        return _write_mask_png(obj, path)
    header, payload = _header_and_payload(obj, geometry_descriptor)
    # Canonical JSON so identical objects produce identical bytes.
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(len(text)).tobytes())
        f.write(text)
        f.write(payload.tobytes())
    return path


def read_container(path):
    """Read a container written by :func:`write_container`.

    Returns a ChannelData, Image2D, or LabelMask according to the header.
    """
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] == _PNG_MAGIC:
        return _read_mask_png(path)
    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: expected magic {MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 8:
        raise TruncatedPayloadError(f"{path}: file ends inside the header length field")
    hlen = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    if len(blob) < 8 + hlen:
        raise TruncatedPayloadError(f"{path}: file ends inside the header")
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise HeaderError(f"{path}: header is not valid JSON: {e}") from e
    if not isinstance(header, dict):
        raise HeaderError(f"{path}: header must be a JSON object")
    payload = blob[8 + hlen :]
    return _decode(header, payload, path)


def _decode(header: dict, payload: bytes, path):
    try:
        kind = header["kind"]
        dims = [int(d) for d in header["dims"]]
        dtype_name = header["dtype"]
    except (KeyError, TypeError, ValueError) as e:
        raise HeaderError(f"{path}: missing or malformed header field: {e}") from e
    if dtype_name not in _DTYPES:
        raise HeaderError(f"{path}: unknown dtype {dtype_name!r}")
    if len(dims) != 2 or any(d < 1 for d in dims):
        raise HeaderError(f"{path}: dims must be two positive integers, got {dims}")
    dtype = _DTYPES[dtype_name]
    expected = dims[0] * dims[1] * dtype.itemsize
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise PayloadSizeMismatchError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)

    if kind == "channels":
        if dtype_name != "f32":
            raise HeaderError(f"{path}: channels payload must be f32")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValueError(f"{path}: channel samples contain non-finite values")
        try:
            fs_hz = float(header["fs_hz"])
            t0_s = float(header.get("t0_s", 0.0))
        except (KeyError, TypeError, ValueError) as e:
            raise HeaderError(f"{path}: bad sampling metadata: {e}") from e
        return ChannelData(samples=arr, fs_hz=fs_hz, t0_s=t0_s)
    if kind == "image":
        if dtype_name != "f32":
            raise HeaderError(f"{path}: image payload must be f32")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValueError(f"{path}: image contains non-finite values")
        return Image2D(grid=_grid_from_header(header, dims), data=arr)
    if kind == "mask":
        if dtype_name != "u16":
            raise HeaderError(f"{path}: mask payload must be u16")
        mask_kind = header.get("mask_kind", BINARY)
        if mask_kind not in (BINARY, MULTILABEL):
            raise HeaderError(f"{path}: unknown mask_kind {mask_kind!r}")
        # LabelMask validates binary/dense-label invariants on construction.
        return LabelMask(grid=_grid_from_header(header, dims), labels=arr.astype(np.int32), kind=mask_kind)
    raise HeaderError(f"{path}: unknown kind {kind!r}")


def _sidecar_path(png_path: Path) -> Path:
    return png_path.with_suffix(".json")


def _write_mask_png(mask: LabelMask, path: Path):
    labels = mask.labels
    if labels.max(initial=0) <= 255:
        img = Image.frombytes("L", (mask.grid.width_px, mask.grid.height_px),
                              labels.astype(np.uint8).tobytes())
    elif labels.max(initial=0) <= np.iinfo(np.uint16).max:
        img = Image.frombytes("I;16", (mask.grid.width_px, mask.grid.height_px),
                              labels.astype("<u2").tobytes())
    else:
        raise ValueError("mask labels exceed 16-bit PNG range")
    img.save(path, format="PNG")
    sidecar = {
        "kind": "mask",
        "mask_kind": mask.kind,
        "dims": list(mask.grid.shape),
        "grid": _grid_header(mask.grid),
    }
    _sidecar_path(path).write_text(
        json.dumps(sidecar, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )
    return path


def _read_mask_png(path: Path) -> LabelMask:
    sidecar_path = _sidecar_path(path)
    if not sidecar_path.exists():
        raise HeaderError(f"{path}: missing JSON sidecar {sidecar_path.name}")
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise HeaderError(f"{sidecar_path}: sidecar is not valid JSON: {e}") from e
    img = Image.open(path)
    if img.mode not in ("L", "I;16", "I"):
        raise HeaderError(f"{path}: PNG mask must be grayscale, got mode {img.mode}")
    labels = np.asarray(img).astype(np.int32)
    try:
        dims = [int(d) for d in sidecar.get("dims", labels.shape)]
    except (TypeError, ValueError) as e:
        raise HeaderError(f"{sidecar_path}: bad dims: {e}") from e
    if list(labels.shape) != dims:
        raise PayloadSizeMismatchError(
            f"{path}: PNG is {list(labels.shape)}, sidecar declares {dims}"
        )
    mask_kind = sidecar.get("mask_kind", BINARY)
    if mask_kind not in (BINARY, MULTILABEL):
        raise HeaderError(f"{sidecar_path}: unknown mask_kind {mask_kind!r}")
    return LabelMask(grid=_grid_from_header(sidecar, dims), labels=labels, kind=mask_kind)
