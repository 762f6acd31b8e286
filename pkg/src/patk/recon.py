"""Delay-and-sum reconstruction and sparse-channel duplication expansion."""

from __future__ import annotations

import numpy as np

from .core import ArrayGeometry, ChannelData, Image2D, ImageGrid
from .errors import ChannelIndexError, JobCancelledError


def sample_channel(channel_row, tau_s, fs_hz, t0_s=0.0):
    """Linearly interpolated sample of one channel at flight time *tau_s*.

    Out-of-range times read as 0 by contract (not an error).
    """
    row = np.asarray(channel_row)
    u = (tau_s - t0_s) * fs_hz
    n = row.shape[-1]
    if u < 0 or u > n - 1:
        return 0.0
    k0 = int(np.floor(u))
    k1 = min(k0 + 1, n - 1)
    w = u - k0
    return float(row[k0] * (1.0 - w) + row[k1] * w)


def _interp_row(row: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized sample_channel over an array of fractional indices."""
    n = row.shape[0]
    valid = (u >= 0.0) & (u <= n - 1)
    uc = np.clip(u, 0.0, n - 1)
    k0 = np.floor(uc).astype(np.intp)
    k1 = np.minimum(k0 + 1, n - 1)
    w = uc - k0
    vals = row[k0] * (1.0 - w) + row[k1] * w
    return np.where(valid, vals, 0.0)


def _grid_points(grid: ImageGrid):
    """Flattened world coordinates of all pixel centers, row-major."""
    xs = grid.x_coords()
    ys = grid.y_coords()
    px = np.broadcast_to(xs[None, :], grid.shape).ravel()
    py = np.broadcast_to(ys[:, None], grid.shape).ravel()
    return px, py


def das_kernel(data: ChannelData, geometry: ArrayGeometry, grid: ImageGrid,
               tau_fn, should_cancel=None) -> Image2D:
    """Shared DAS loop: accumulate channels in fixed order for reproducibility.

    tau_fn(px, py, element) returns per-pixel flight times in seconds for
    one element; px/py are flattened pixel-center world coordinates.
    """
    geometry.check_channels(data)
    px, py = _grid_points(grid)
    acc = np.zeros(px.shape[0], dtype=np.float64)
    samples = data.samples
    for i in range(geometry.n_elements):
        if should_cancel is not None and should_cancel():
            raise JobCancelledError("reconstruction cancelled")
        tau = tau_fn(px, py, geometry.elements[i])
        u = (tau - data.t0_s) * data.fs_hz
        acc += _interp_row(samples[i].astype(np.float64), u)
    return Image2D(grid=grid, data=acc.reshape(grid.shape).astype(np.float32))


def das_reconstruct(data: ChannelData, geometry: ArrayGeometry, grid: ImageGrid,
                    c_m_s: float, should_cancel=None) -> Image2D:
    """Single speed-of-sound delay-and-sum: tau = |pixel - element| / c."""
    if c_m_s <= 0:
        raise ValueError(f"c_m_s must be > 0, got {c_m_s}")
    c_mm_s = c_m_s * 1000.0

    def tau_fn(px, py, element):
        return np.hypot(px - element[0], py - element[1]) / c_mm_s

    return das_kernel(data, geometry, grid, tau_fn, should_cancel)


def expand_sparse_channels(data: ChannelData, dense_geometry: ArrayGeometry):
    """Duplicate each sparse channel into two adjacent dense channels.

    Row k of the input becomes rows 2k and 2k+1 of the output, bit-exact,
    so an n-channel acquisition drives a 2n-element geometry.
    """
    if dense_geometry.n_elements != 2 * data.n_channels:
        raise ChannelIndexError(
            f"dense geometry has {dense_geometry.n_elements} elements, "
            f"need exactly {2 * data.n_channels}"
        )
    expanded = np.repeat(data.samples, 2, axis=0)
    return ChannelData(samples=expanded, fs_hz=data.fs_hz, t0_s=data.t0_s), dense_geometry
