"""Dual speed-of-sound reconstruction: ellipse fit, two-media time-of-flight,
and the dual-SoS delay-and-sum built on the shared DAS kernel.

The body outline is modeled as an ellipse fitted to a segmentation mask;
flight times follow straight rays split at the ellipse boundary into an
inside part at c_in and an outside part at c_out.
"""

from __future__ import annotations

import json

import numpy as np

from .core import ArrayGeometry, ChannelData, Ellipse, Image2D, ImageGrid, LabelMask, fold_theta
from .errors import DegenerateMaskError
from .recon import das_kernel, das_reconstruct

MM_PER_M = 1000.0


def fit_ellipse_from_mask(mask: LabelMask, grid: ImageGrid | None = None) -> Ellipse:
    """Second-moment ellipse fit to a binary mask's foreground.

    Exact for a uniformly filled ellipse: with eigenvalues l1 >= l2 of the
    foreground coordinate covariance, a = 2*sqrt(l1) and b = 2*sqrt(l2).
    """
    if mask.kind != "binary":
        raise DegenerateMaskError("ellipse fit requires a binary mask")
    grid = grid if grid is not None else mask.grid
    ys, xs = np.nonzero(mask.labels)
    if xs.size < 5:
        raise DegenerateMaskError(f"need >= 5 foreground pixels, got {xs.size}")
    wx = grid.origin_x_mm + xs * grid.pitch_mm
    wy = grid.origin_y_mm + ys * grid.pitch_mm
    cx, cy = float(wx.mean()), float(wy.mean())
    dx, dy = wx - cx, wy - cy
    cov = np.array([
        [np.mean(dx * dx), np.mean(dx * dy)],
        [np.mean(dx * dy), np.mean(dy * dy)],
    ])
    evals, evecs = np.linalg.eigh(cov)  # ascending
    l2, l1 = float(evals[0]), float(evals[1])
    if l2 <= 0:
        raise DegenerateMaskError("collinear foreground: covariance is degenerate")
    v1 = evecs[:, 1]
    theta = fold_theta(np.arctan2(v1[1], v1[0]))
    return Ellipse(cx_mm=cx, cy_mm=cy, a_mm=2.0 * np.sqrt(l1), b_mm=2.0 * np.sqrt(l2),
                   theta_rad=theta)


def _to_ellipse_frame(x, y, e: Ellipse):
    ct, st = np.cos(e.theta_rad), np.sin(e.theta_rad)
    dx = x - e.cx_mm
    dy = y - e.cy_mm
    return (ct * dx + st * dy) / e.a_mm, (-st * dx + ct * dy) / e.b_mm


def inside_length(p0, p1, e: Ellipse):
    """Length (mm) of segment p0->p1 lying inside ellipse *e*.

    Accepts single points (2,) or stacked points (..., 2); broadcasting
    applies between p0 and p1. The two endpoints are canonically ordered
    before solving so the result is exactly symmetric in (p0, p1).
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    scalar = p0.ndim == 1 and p1.ndim == 1
    p0, p1 = np.broadcast_arrays(p0, p1)
    p0 = p0.astype(np.float64, copy=True)
    p1 = p1.astype(np.float64, copy=True)
    # Canonical endpoint order (lexicographic) makes the float arithmetic,
    # not just the math, symmetric under endpoint swap.
    swap = (p1[..., 0] < p0[..., 0]) | (
        (p1[..., 0] == p0[..., 0]) & (p1[..., 1] < p0[..., 1])
    )
    lo = np.where(swap[..., None], p1, p0)
    hi = np.where(swap[..., None], p0, p1)

    length = np.hypot(hi[..., 0] - lo[..., 0], hi[..., 1] - lo[..., 1])
    u0, v0 = _to_ellipse_frame(lo[..., 0], lo[..., 1], e)
    u1, v1 = _to_ellipse_frame(hi[..., 0], hi[..., 1], e)
    du, dv = u1 - u0, v1 - v0
    # |q0 + t*dq|^2 = 1 along the unit circle in the scaled frame.
    A = du * du + dv * dv
    B = 2.0 * (u0 * du + v0 * dv)
    C = u0 * u0 + v0 * v0 - 1.0
    disc = B * B - 4.0 * A * C
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t_lo = (-B - sq) / (2.0 * A)
        t_hi = (-B + sq) / (2.0 * A)
    t_lo = np.clip(t_lo, 0.0, 1.0)
    t_hi = np.clip(t_hi, 0.0, 1.0)
    frac = np.where((disc > 0.0) & (A > 0.0), t_hi - t_lo, 0.0)
    # Degenerate segment (p0 == p1): zero length regardless of position.
    result = np.where(length > 0.0, frac * length, 0.0)
    return float(result) if scalar else result


def tof_dual(p, element, e: Ellipse, c_in_m_s: float, c_out_m_s: float):
    """Two-media straight-ray flight time in seconds.

    c_in == c_out short-circuits to the single-medium time so the dual
    path is bit-identical to the single-SoS path in the degenerate case.
    """
    p = np.asarray(p, dtype=np.float64)
    element = np.asarray(element, dtype=np.float64)
    scalar = p.ndim == 1 and element.ndim == 1
    pb, eb = np.broadcast_arrays(p, element)
    total = np.hypot(pb[..., 0] - eb[..., 0], pb[..., 1] - eb[..., 1])
    if c_in_m_s == c_out_m_s:
        tau = total / (c_out_m_s * MM_PER_M)
        return float(tau) if scalar else tau
    l_in = inside_length(pb, eb, e)
    tau = l_in / (c_in_m_s * MM_PER_M) + (total - l_in) / (c_out_m_s * MM_PER_M)
    return float(tau) if scalar else tau


def das_dual_sos(data: ChannelData, geometry: ArrayGeometry, grid: ImageGrid,
                 e: Ellipse, c_in_m_s: float, c_out_m_s: float,
                 should_cancel=None) -> Image2D:
    """Delay-and-sum with two-media flight times through ellipse *e*."""
    if c_in_m_s <= 0 or c_out_m_s <= 0:
        raise ValueError("speeds must be > 0")
    if c_in_m_s == c_out_m_s:
        return das_reconstruct(data, geometry, grid, c_out_m_s, should_cancel)

    def tau_fn(px, py, element):
        pts = np.stack([px, py], axis=-1)
        return tof_dual(pts, element, e, c_in_m_s, c_out_m_s)

    return das_kernel(data, geometry, grid, tau_fn, should_cancel)


def ellipse_to_text(e: Ellipse) -> str:
    """Serialize an ellipse to the key/value document used for CLI piping."""
    return json.dumps(
        {"cx": e.cx_mm, "cy": e.cy_mm, "a": e.a_mm, "b": e.b_mm, "theta": e.theta_rad},
        sort_keys=True,
    )


def ellipse_from_text(text: str) -> Ellipse:
    doc = json.loads(text)
    return Ellipse(cx_mm=float(doc["cx"]), cy_mm=float(doc["cy"]),
                   a_mm=float(doc["a"]), b_mm=float(doc["b"]),
                   theta_rad=float(doc["theta"]))
