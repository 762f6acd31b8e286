"""Shared domain types and world/pixel coordinate mapping.

Conventions used across the whole package:

* world units are millimeters, time is seconds, sampling rates are Hz;
* x is the column direction (increasing rightward), y is the row
  direction and increases with depth (downward);
* pixel (0, 0) is the top-left pixel and its *center* sits at the grid
  origin;
* all types are immutable values after construction; arrays are stored
  read-only so they can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChannelCountMismatchError, GridMismatchError, MaskLabelError


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageGrid:
    """World placement of a raster: origin (pixel-center), isotropic pitch, size."""

    origin_x_mm: float
    origin_y_mm: float
    pitch_mm: float
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.pitch_mm <= 0:
            raise ValueError(f"pitch_mm must be > 0, got {self.pitch_mm}")
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError(f"grid size must be >= 1x1, got {self.width_px}x{self.height_px}")

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) numpy shape."""
        return (self.height_px, self.width_px)

    def x_coords(self) -> np.ndarray:
        """World x of every column center (mm)."""
        return self.origin_x_mm + self.pitch_mm * np.arange(self.width_px)

    def y_coords(self) -> np.ndarray:
        """World y of every row center (mm)."""
        return self.origin_y_mm + self.pitch_mm * np.arange(self.height_px)

    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) of pixel centers, mm."""
        return (
            self.origin_x_mm,
            self.origin_x_mm + self.pitch_mm * (self.width_px - 1),
            self.origin_y_mm,
            self.origin_y_mm + self.pitch_mm * (self.height_px - 1),
        )


def pixel_to_world(ix, iy, grid: ImageGrid):
    """Map (column, row) indices to world mm. Indices may be fractional."""
    x = grid.origin_x_mm + np.asarray(ix, dtype=np.float64) * grid.pitch_mm
    y = grid.origin_y_mm + np.asarray(iy, dtype=np.float64) * grid.pitch_mm
    if np.isscalar(ix) or (isinstance(ix, np.ndarray) and ix.ndim == 0):
        return float(x), float(y)
    return x, y


def world_to_pixel(x_mm, y_mm, grid: ImageGrid):
    """Exact inverse of :func:`pixel_to_world`; returns fractional indices."""
    ix = (np.asarray(x_mm, dtype=np.float64) - grid.origin_x_mm) / grid.pitch_mm
    iy = (np.asarray(y_mm, dtype=np.float64) - grid.origin_y_mm) / grid.pitch_mm
    if np.isscalar(x_mm) or (isinstance(x_mm, np.ndarray) and x_mm.ndim == 0):
        return float(ix), float(iy)
    return ix, iy


@dataclass(frozen=True)
class Image2D:
    """Scalar raster registered to an :class:`ImageGrid`. Data is float32, row-major."""

    grid: ImageGrid
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32).reshape(self.grid.shape)
        if not np.all(np.isfinite(data)):
            raise ValueError("image data must be finite")
        object.__setattr__(self, "data", _readonly(data))

    def same_grid(self, other) -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")


@dataclass(frozen=True)
class Volume3D:
    """Ordered stack of slices sharing one grid, spaced step_mm apart."""

    slices: tuple
    step_mm: float

    def __post_init__(self):
        if len(self.slices) < 1:
            raise ValueError("volume needs at least one slice")
        if self.step_mm <= 0:
            raise ValueError(f"step_mm must be > 0, got {self.step_mm}")
        grid = self.slices[0].grid
        for s in self.slices[1:]:
            if s.grid != grid:
                raise GridMismatchError("all slices must share one grid")
        object.__setattr__(self, "slices", tuple(self.slices))

    @property
    def grid(self) -> ImageGrid:
        return self.slices[0].grid

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    def as_array(self) -> np.ndarray:
        """(n_slices, height, width) float32 view of the stack."""
        return np.stack([s.data for s in self.slices])


BINARY = "binary"
MULTILABEL = "multilabel"


@dataclass(frozen=True)
class LabelMask:
    """Integer raster on a grid. binary: labels in {0,1}; multilabel: dense 1..K."""

    grid: ImageGrid
    labels: np.ndarray = field(repr=False)
    kind: str = BINARY

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if not np.issubdtype(labels.dtype, np.integer):
            raise MaskLabelError(f"labels must be integers, got dtype {labels.dtype}")
        labels = labels.astype(np.int32).reshape(self.grid.shape)
        if labels.min(initial=0) < 0:
            raise MaskLabelError("labels must be non-negative")
        if self.kind == BINARY:
            if labels.max(initial=0) > 1:
                raise MaskLabelError("binary mask may only contain 0 and 1")
        elif self.kind == MULTILABEL:
            k = int(labels.max(initial=0))
            present = np.unique(labels)
            expected = np.arange(0, k + 1)
            nonzero = present[present > 0]
            if k > 0 and not np.array_equal(nonzero, expected[1:]):
                missing = sorted(set(range(1, k + 1)) - set(int(v) for v in nonzero))
                raise MaskLabelError(f"multilabel mask must use dense labels 1..{k}; missing {missing}")
        else:
            raise MaskLabelError(f"unknown mask kind {self.kind!r}")
        object.__setattr__(self, "labels", _readonly(labels))

    @property
    def n_labels(self) -> int:
        return int(self.labels.max(initial=0))

    def foreground(self) -> np.ndarray:
        """Boolean foreground raster."""
        return self.labels > 0


@dataclass(frozen=True)
class ChannelData:
    """Per-element time series: (n_channels, n_samples) float32 at fs_hz."""

    samples: np.ndarray = field(repr=False)
    fs_hz: float = 0.0
    t0_s: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {samples.shape}")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError(f"samples must be non-empty, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.fs_hz <= 0:
            raise ValueError(f"fs_hz must be > 0, got {self.fs_hz}")
        object.__setattr__(self, "samples", _readonly(samples))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class ArrayGeometry:
    """Ordered transducer element positions (x_mm, y_mm)."""

    elements: np.ndarray = field(repr=False)
    descriptor: str = ""

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=np.float64)
        if elements.ndim != 2 or elements.shape[1] != 2 or elements.shape[0] < 1:
            raise ValueError(f"elements must be (n, 2) with n >= 1, got shape {elements.shape}")
        object.__setattr__(self, "elements", _readonly(elements))

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def check_channels(self, data: ChannelData) -> None:
        if data.n_channels != self.n_elements:
            raise ChannelCountMismatchError(
                f"{data.n_channels} channels vs {self.n_elements} elements"
            )


@dataclass(frozen=True)
class PromptPoint:
    """Click prompt in pixel coordinates, label 1 = foreground, 0 = background."""

    x_px: int
    y_px: int
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"prompt label must be 0 or 1, got {self.label}")

    def check_inside(self, grid: ImageGrid) -> None:
        if not (0 <= self.x_px < grid.width_px and 0 <= self.y_px < grid.height_px):
            raise ValueError(
                f"prompt ({self.x_px},{self.y_px}) outside {grid.width_px}x{grid.height_px} image"
            )


@dataclass(frozen=True)
class Ellipse:
    """Ellipse: center (mm), semi-axes a >= b (mm), rotation of the a-axis in (-pi/2, pi/2]."""

    cx_mm: float
    cy_mm: float
    a_mm: float
    b_mm: float
    theta_rad: float

    def __post_init__(self):
        if not (self.a_mm >= self.b_mm > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a_mm}, b={self.b_mm}")
        if not (-np.pi / 2 < self.theta_rad <= np.pi / 2):
            raise ValueError(f"theta must lie in (-pi/2, pi/2], got {self.theta_rad}")

    def contains(self, x_mm, y_mm) -> np.ndarray:
        """True where (x, y) lies strictly inside or on the ellipse."""
        ct, st = np.cos(self.theta_rad), np.sin(self.theta_rad)
        dx = np.asarray(x_mm, dtype=np.float64) - self.cx_mm
        dy = np.asarray(y_mm, dtype=np.float64) - self.cy_mm
        u = (ct * dx + st * dy) / self.a_mm
        v = (-st * dx + ct * dy) / self.b_mm
        return u * u + v * v <= 1.0


@dataclass(frozen=True)
class RegionStats:
    """Per-region summary: pixel area, world area, mean |intensity|, centroid."""

    label: int
    area_px: int
    area_mm2: float
    mean_intensity: float
    centroid_px: tuple[float, float]

    def __post_init__(self):
        if self.area_px < 1:
            raise ValueError("region must contain at least one pixel")
        if not np.isfinite(self.mean_intensity):
            raise ValueError("mean_intensity must be finite")


def fold_theta(theta: float) -> float:
    """Fold an axis angle into (-pi/2, pi/2]."""
    theta = float(theta)
    while theta > np.pi / 2:
        theta -= np.pi
    while theta <= -np.pi / 2:
        theta += np.pi
    return theta
