"""Mask-driven custom processing: skin-band construction and removal,
volume stacking, maximum-intensity projection, connected components,
region statistics, and vessel refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import BINARY, MULTILABEL, Image2D, ImageGrid, LabelMask, RegionStats, Volume3D
from .errors import GridMismatchError

KEEP = "keep"
REMOVE = "remove"

DEPTH = "depth"
SLICE_NORMAL = "slice-normal"


@dataclass(frozen=True)
class VesselCriteria:
    """Region filter: inclusive area band (mm^2) and relative intensity floor.

    Defaults are tuned on the synthetic acceptance scene; the quantities
    (area, mean intensity) are the published refinement features, the
    thresholds are configuration.
    """

    area_min_mm2: float = 0.05
    area_max_mm2: float = 20.0
    intensity_rel_min: float = 0.15

    def __post_init__(self):
        if not (0 <= self.area_min_mm2 <= self.area_max_mm2):
            raise ValueError("need 0 <= area_min <= area_max")
        if not (0 <= self.intensity_rel_min <= 1):
            raise ValueError("intensity_rel_min must lie in [0, 1]")


def upper_boundary(mask: LabelMask) -> np.ndarray:
    """Per-column smallest foreground row; -1 marks an empty column."""
    fg = mask.labels > 0
    has = fg.any(axis=0)
    first = fg.argmax(axis=0)
    return np.where(has, first, -1).astype(np.int64)


def skin_band_mask(mask: LabelMask, grid: ImageGrid | None = None,
                   depth_mm: float = 10.0, offset_mm: float = 0.0) -> LabelMask:
    """Band of 1s from offset below each column's upper boundary to offset+depth.

    Row bounds are clamped to the grid; columns with no boundary stay 0.
    """
    if depth_mm <= 0:
        raise ValueError(f"depth_mm must be > 0, got {depth_mm}")
    if offset_mm < 0:
        raise ValueError(f"offset_mm must be >= 0, got {offset_mm}")
    grid = grid if grid is not None else mask.grid
    if grid != mask.grid:
        raise GridMismatchError("mask grid does not match the supplied grid")
    b = upper_boundary(mask)
    # Epsilon guards against 10/0.1 style float division landing below the
    # integer row the exact arithmetic would give.
    lo_px = int(np.ceil(offset_mm / grid.pitch_mm - 1e-9))
    hi_px = int(np.floor((offset_mm + depth_mm) / grid.pitch_mm + 1e-9))
    rows = np.arange(grid.height_px)[:, None]
    band = (b >= 0) & (rows >= b + lo_px) & (rows <= b + hi_px)
    return LabelMask(grid=grid, labels=band.astype(np.int32), kind=BINARY)


def apply_mask(image: Image2D, mask: LabelMask, mode: str = KEEP) -> Image2D:
    """keep: image * mask; remove: image * (1 - mask). Pixelwise, exact."""
    if image.grid != mask.grid:
        raise GridMismatchError("image and mask grids differ")
    if mode == KEEP:
        sel = mask.labels > 0
    elif mode == REMOVE:
        sel = mask.labels == 0
    else:
        raise ValueError(f"mode must be keep or remove, got {mode!r}")
    return Image2D(grid=image.grid, data=np.where(sel, image.data, np.float32(0.0)))


def stack_volume(slices, step_mm: float) -> Volume3D:
    """Ordered stack of same-grid slices spaced step_mm apart."""
    return Volume3D(slices=tuple(slices), step_mm=step_mm)


def mip(volume: Volume3D, axis: str = SLICE_NORMAL) -> Image2D:
    """Maximum-intensity projection of |value| along the chosen axis.

    slice-normal: project along the stack axis; output keeps the slice grid.
    depth: project along image rows; output row s holds slice s's
    per-column maxima (width = slice width, height = slice count).
    """
    stack = np.abs(volume.as_array())
    if axis == SLICE_NORMAL:
        return Image2D(grid=volume.grid, data=stack.max(axis=0))
    if axis == DEPTH:
        g = volume.grid
        # Rows of the output are scan positions spaced step_mm apart; the
        # grid keeps the slice pitch, origin y at the scan start.
        out_grid = ImageGrid(origin_x_mm=g.origin_x_mm, origin_y_mm=0.0,
                             pitch_mm=g.pitch_mm, width_px=g.width_px,
                             height_px=volume.n_slices)
        return Image2D(grid=out_grid, data=stack.max(axis=1))
    raise ValueError(f"axis must be depth or slice-normal, got {axis!r}")


_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


def connected_components(mask: LabelMask, connectivity: int = 8) -> LabelMask:
    """Label foreground components 1..K in raster order of first pixel."""
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    raw, k = ndimage.label(mask.labels > 0, structure=_STRUCTURES[connectivity])
    if k == 0:
        return LabelMask(grid=mask.grid, labels=np.zeros_like(raw, dtype=np.int32),
                         kind=MULTILABEL)
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    labels_at_nz = flat[nz]
    # First raster index per label, then rank labels by that index.
    order = np.zeros(k + 1, dtype=np.int64)
    seen = np.zeros(k + 1, dtype=bool)
    for pos, lab in zip(nz, labels_at_nz):
        if not seen[lab]:
            seen[lab] = True
            order[lab] = pos
    rank = np.argsort(order[1:], kind="stable")
    remap = np.zeros(k + 1, dtype=np.int32)
    remap[1 + rank] = np.arange(1, k + 1, dtype=np.int32)
    return LabelMask(grid=mask.grid, labels=remap[raw], kind=MULTILABEL)


def region_stats(labels: LabelMask, image: Image2D,
                 grid: ImageGrid | None = None) -> list[RegionStats]:
    """Per-label area (px and mm^2), mean |intensity|, and pixel centroid."""
    grid = grid if grid is not None else labels.grid
    if labels.grid != image.grid or labels.grid != grid:
        raise GridMismatchError("labels, image, and grid must agree")
    lab = labels.labels
    k = labels.n_labels
    if k == 0:
        return []
    flat = lab.ravel()
    counts = np.bincount(flat, minlength=k + 1)
    mag = np.abs(image.data).ravel().astype(np.float64)
    sums = np.bincount(flat, weights=mag, minlength=k + 1)
    ys, xs = np.indices(lab.shape)
    sx = np.bincount(flat, weights=xs.ravel(), minlength=k + 1)
    sy = np.bincount(flat, weights=ys.ravel(), minlength=k + 1)
    out = []
    for label in range(1, k + 1):
        n = int(counts[label])
        out.append(RegionStats(
            label=label,
            area_px=n,
            area_mm2=n * grid.pitch_mm ** 2,
            mean_intensity=float(sums[label] / n),
            centroid_px=(float(sx[label] / n), float(sy[label] / n)),
        ))
    return out


def refine_vessels(labels: LabelMask, image: Image2D,
                   criteria: VesselCriteria = VesselCriteria()) -> LabelMask:
    """Keep regions inside the area band with mean |intensity| above the
    relative floor; survivors are relabeled densely preserving order."""
    stats = region_stats(labels, image)
    floor = criteria.intensity_rel_min * float(np.abs(image.data).max())
    keep = [s.label for s in stats
            if criteria.area_min_mm2 <= s.area_mm2 <= criteria.area_max_mm2
            and s.mean_intensity >= floor]
    remap = np.zeros(labels.n_labels + 1, dtype=np.int32)
    for new, old in enumerate(keep, start=1):
        remap[old] = new
    return LabelMask(grid=labels.grid, labels=remap[labels.labels], kind=MULTILABEL)
