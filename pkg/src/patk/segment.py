"""Prompt-driven segmentation: the built-in classical segmenter and the
client for external backends speaking the segmentation wire protocol.

The built-in chain (smooth |image|, threshold, seeded flood fill) serves
the same interface contract a learned backend does, with oracle-checkable
behavior and zero model weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import requests
from scipy import ndimage

from .core import BINARY, MULTILABEL, Image2D, LabelMask, PromptPoint
from .errors import (
    BackendError,
    DegenerateImageError,
    MalformedResponseError,
    PromptError,
    TransportError,
)
from .maskops import connected_components
from .protocol import PROTOCOL_PATH, build_segment_request, parse_segment_response

OTSU = "otsu"
PERCENTILE = "percentile"


@dataclass(frozen=True)
class SegmentRequest:
    """Image plus ordered point prompts; at least one foreground prompt."""

    image: Image2D
    prompts: tuple
    mode: str = BINARY

    def __post_init__(self):
        prompts = tuple(self.prompts)
        if self.mode not in (BINARY, MULTILABEL):
            raise PromptError(f"mode must be binary or multilabel, got {self.mode!r}")
        if not any(p.label == 1 for p in prompts):
            raise PromptError("need at least one foreground prompt")
        for p in prompts:
            if not isinstance(p, PromptPoint):
                raise PromptError(f"prompts must be PromptPoint, got {type(p).__name__}")
            try:
                p.check_inside(self.image.grid)
            except ValueError as e:
                raise PromptError(str(e)) from e
        object.__setattr__(self, "prompts", prompts)


@dataclass(frozen=True)
class BuiltinParams:
    """Built-in segmenter knobs: pre-smoothing, threshold rule, growth slack."""

    smooth_sigma_px: float = 2.0
    threshold_mode: str = OTSU
    percentile: float = 95.0
    grow_tolerance: float = 0.0

    def __post_init__(self):
        if self.smooth_sigma_px < 0:
            raise ValueError("smooth_sigma_px must be >= 0")
        if self.threshold_mode not in (OTSU, PERCENTILE):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if not (0.0 < self.percentile < 100.0):
            raise ValueError("percentile must lie in (0, 100)")
        if self.grow_tolerance < 0:
            raise ValueError("grow_tolerance must be >= 0")


@dataclass(frozen=True)
class SegmentResult:
    """Mask plus backend-reported metadata from a segmentation call."""

    mask: LabelMask
    elapsed_ms: float
    backend: str


def otsu_threshold(values: np.ndarray) -> float:
    """Otsu's threshold over a 1-D sample; uniform input falls back to v/2."""
    values = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        # Single-valued population: between-class variance is flat, so pick
        # the midpoint below the value (everything becomes foreground).
        return hi / 2.0
    hist, edges = np.histogram(values, bins=256, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    p = hist.astype(np.float64) / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * centers)
    mu_t = mu[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma_b2 = (mu_t * omega - mu) ** 2 / (omega * (1.0 - omega))
    sigma_b2[~np.isfinite(sigma_b2)] = -1.0
    return float(centers[int(np.argmax(sigma_b2))])


def _threshold_mask(image: Image2D, params: BuiltinParams) -> np.ndarray:
    mag = np.abs(image.data).astype(np.float64)
    if params.smooth_sigma_px > 0:
        smooth = ndimage.gaussian_filter(mag, sigma=params.smooth_sigma_px)
    else:
        smooth = mag
    if smooth.max() <= smooth.min():
        raise DegenerateImageError("zero-variance image: threshold undefined")
    nonzero = smooth[smooth > 0]
    if nonzero.size == 0:
        raise DegenerateImageError("no nonzero pixels: threshold undefined")
    if params.threshold_mode == OTSU:
        thr = otsu_threshold(nonzero)
    else:
        thr = float(np.percentile(nonzero, params.percentile))
    return smooth >= thr * (1.0 - params.grow_tolerance)


def builtin_segment(request: SegmentRequest, params: BuiltinParams = BuiltinParams()) -> LabelMask:
    """Smooth, threshold, flood-fill from prompts; background prompts delete
    their components.

    binary: union of foreground-prompted components (labels {0,1}).
    multilabel: every surviving component of the threshold mask keeps a
    distinct label, in raster order.
    Foreground prompts off the threshold mask become singleton foreground
    pixels unless a background prompt deletes them.
    """
    grid = request.image.grid
    thresh = _threshold_mask(request.image, params)
    comp = connected_components(
        LabelMask(grid=grid, labels=thresh.astype(np.int32), kind=BINARY)
    ).labels

    fg_prompts = [p for p in request.prompts if p.label == 1]
    bg_prompts = [p for p in request.prompts if p.label == 0]
    deleted = {int(comp[p.y_px, p.x_px]) for p in bg_prompts} - {0}
    bg_pixels = {(p.x_px, p.y_px) for p in bg_prompts}

    # Foreground prompts off the threshold mask force singleton pixels.
    singletons = []
    for p in fg_prompts:
        if comp[p.y_px, p.x_px] == 0 and (p.x_px, p.y_px) not in bg_pixels:
            if (p.x_px, p.y_px) not in singletons:
                singletons.append((p.x_px, p.y_px))

    if request.mode == BINARY:
        keep = {int(comp[p.y_px, p.x_px]) for p in fg_prompts} - {0} - deleted
        out = np.isin(comp, sorted(keep)).astype(np.int32)
        for x, y in singletons:
            out[y, x] = 1
        return LabelMask(grid=grid, labels=out, kind=BINARY)

    survivors = [label for label in range(1, int(comp.max(initial=0)) + 1)
                 if label not in deleted]
    remap = np.zeros(int(comp.max(initial=0)) + 1, dtype=np.int32)
    for new, old in enumerate(survivors, start=1):
        remap[old] = new
    out = remap[comp]
    next_label = len(survivors)
    for x, y in singletons:
        next_label += 1
        out[y, x] = next_label
    return LabelMask(grid=grid, labels=out, kind=MULTILABEL)


def remote_segment(backend_endpoint: str, request: SegmentRequest,
                   timeout_s: float = 60.0) -> SegmentResult:
    """Send the request to a wire-protocol backend and decode the mask.

    The output is exactly the backend's payload or an error; nothing is
    fabricated client-side. Errors are distinct per failure mode:
    TransportError, BackendError (verbatim code/message),
    MalformedResponseError, MaskDimensionMismatchError.
    """
    url = backend_endpoint.rstrip("/")
    if not url.endswith(PROTOCOL_PATH):
        url += PROTOCOL_PATH
    body = build_segment_request(request.image, request.prompts, request.mode)
    try:
        resp = requests.post(url, json=body, timeout=timeout_s)
    except requests.RequestException as e:
        raise TransportError(f"backend unreachable: {e}") from e
    try:
        doc = resp.json()
    except ValueError as e:
        raise MalformedResponseError(f"response is not valid JSON: {e}") from e
    if resp.status_code != 200:
        err = doc.get("error") if isinstance(doc, dict) else None
        if isinstance(err, dict) and "code" in err and "message" in err:
            raise BackendError(str(err["code"]), str(err["message"]))
        raise MalformedResponseError(
            f"HTTP {resp.status_code} without a protocol error body"
        )
    mask, elapsed_ms, backend = parse_segment_response(doc, request.image.grid,
                                                       request.mode)
    return SegmentResult(mask=mask, elapsed_ms=elapsed_ms, backend=backend)
