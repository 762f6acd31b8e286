"""Synthetic forward simulator: point-absorber phantoms recorded by a ring
array under single- or dual-medium straight-ray propagation, plus the
degradation operators (limited view, sparse subsetting) used to emulate
cost-reduced acquisitions.

Flight times reuse the dual-SoS time-of-flight so the forward and inverse
models share one physics implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ArrayGeometry, ChannelData, Ellipse, ImageGrid
from .dualsos import MM_PER_M, tof_dual
from .errors import ChannelIndexError, RecordTooShortError, SourceOutsideGridError

DEFAULT_FC_HZ = 5e6  # transducer center frequency

UNIFORM = "uniform"
DUAL = "dual"


@dataclass(frozen=True)
class Phantom:
    """Point absorbers: tuple of (x_mm, y_mm, amplitude)."""

    sources: tuple

    def __post_init__(self):
        sources = tuple((float(x), float(y), float(a)) for x, y, a in self.sources)
        if len(sources) < 1:
            raise ValueError("phantom needs at least one source")
        for x, y, a in sources:
            if a <= 0:
                raise ValueError(f"amplitudes must be positive, got {a}")
        object.__setattr__(self, "sources", sources)


@dataclass(frozen=True)
class MediumModel:
    """Propagation medium: uniform c_out, or dual with c_in inside an ellipse."""

    mode: str = UNIFORM
    c_out_m_s: float = 1500.0
    c_in_m_s: float | None = None
    boundary: Ellipse | None = None

    def __post_init__(self):
        if self.mode not in (UNIFORM, DUAL):
            raise ValueError(f"mode must be uniform or dual, got {self.mode!r}")
        speeds = [self.c_out_m_s]
        if self.mode == DUAL:
            if self.boundary is None or self.c_in_m_s is None:
                raise ValueError("dual medium requires c_in_m_s and boundary")
            speeds.append(self.c_in_m_s)
        for c in speeds:
            if not (1000.0 <= c <= 2000.0):
                raise ValueError(f"speed {c} m/s outside physical range [1000, 2000]")

    def tof(self, p, element):
        """Flight time (s) from point(s) p to element(s), per the medium."""
        p = np.asarray(p, dtype=np.float64)
        element = np.asarray(element, dtype=np.float64)
        if self.mode == UNIFORM:
            scalar = p.ndim == 1 and element.ndim == 1
            pb, eb = np.broadcast_arrays(p, element)
            tau = np.hypot(pb[..., 0] - eb[..., 0], pb[..., 1] - eb[..., 1]) / (
                self.c_out_m_s * MM_PER_M
            )
            return float(tau) if scalar else tau
        return tof_dual(p, element, self.boundary, self.c_in_m_s, self.c_out_m_s)


def wavelet(t, fc_hz=DEFAULT_FC_HZ):
    """Derivative-of-Gaussian pulse, peak-normalized so max|w| = 1.

    w(t) = -(t/sigma) * exp(-t^2 / (2 sigma^2)) * sqrt(e), sigma = 1/(2 pi fc).
    Odd: w(-t) = -w(t); spectrum magnitude peaks at fc.
    """
    if fc_hz <= 0:
        raise ValueError(f"fc_hz must be > 0, got {fc_hz}")
    sigma = 1.0 / (2.0 * np.pi * fc_hz)
    x = np.asarray(t, dtype=np.float64) / sigma
    w = -x * np.exp(-0.5 * x * x) * np.exp(0.5)
    return float(w) if np.isscalar(t) else w


def ring_array(n_elements: int, radius_mm: float, center=(0.0, 0.0),
               descriptor: str = "") -> ArrayGeometry:
    """Full-ring geometry: n elements evenly spaced over 360 degrees.

    Element i sits at angle 2*pi*i/n, so indices 0..n/2-1 of an n-ring
    form a contiguous half ring.
    """
    if n_elements < 1:
        raise ValueError("need at least one element")
    if radius_mm <= 0:
        raise ValueError("radius must be > 0")
    ang = 2.0 * np.pi * np.arange(n_elements) / n_elements
    elements = np.stack([center[0] + radius_mm * np.cos(ang),
                         center[1] + radius_mm * np.sin(ang)], axis=1)
    if not descriptor:
        descriptor = f"ring{n_elements} r={radius_mm}mm"
    return ArrayGeometry(elements=elements, descriptor=descriptor)


def simulate(phantom: Phantom, geometry: ArrayGeometry, medium: MediumModel,
             fs_hz: float, n_samples: int, t0_s: float = 0.0,
             fc_hz: float = DEFAULT_FC_HZ, decay_mode: bool = False,
             grid: ImageGrid | None = None) -> ChannelData:
    """Record the phantom: samples[i][k] = sum_s A_s * w(k/fs + t0 - tau(s, i)).

    No geometric amplitude decay unless decay_mode (1/sqrt(distance)).
    When *grid* is given, sources must lie within its world extent.
    """
    if fs_hz <= 0 or n_samples < 1:
        raise ValueError("need fs_hz > 0 and n_samples >= 1")
    if grid is not None:
        x_min, x_max, y_min, y_max = grid.extent()
        for x, y, _ in phantom.sources:
            if not (x_min <= x <= x_max and y_min <= y <= y_max):
                raise SourceOutsideGridError(
                    f"source ({x}, {y}) outside grid extent "
                    f"x:[{x_min}, {x_max}] y:[{y_min}, {y_max}]"
                )
    sigma = 1.0 / (2.0 * np.pi * fc_hz)
    t_end = t0_s + (n_samples - 1) / fs_hz
    t = t0_s + np.arange(n_samples) / fs_hz
    acc = np.zeros((geometry.n_elements, n_samples), dtype=np.float64)
    for x, y, amp in phantom.sources:
        tau = np.atleast_1d(medium.tof(np.array([x, y]), geometry.elements))
        worst = float(tau.max()) + 6.0 * sigma
        if worst > t_end:
            raise RecordTooShortError(
                f"farthest source needs {worst:.3e}s, record ends at {t_end:.3e}s"
            )
        gain = amp
        if decay_mode:
            d = np.hypot(geometry.elements[:, 0] - x, geometry.elements[:, 1] - y)
            gain = amp / np.sqrt(np.maximum(d, 1e-6))[:, None]
        acc += gain * wavelet(t[None, :] - tau[:, None], fc_hz)
    return ChannelData(samples=acc.astype(np.float32), fs_hz=fs_hz, t0_s=t0_s)


def subset_channels(data: ChannelData, geometry: ArrayGeometry, indices):
    """Limited-view / sparse acquisition: keep rows and elements at *indices*.

    Indices must be strictly increasing; fs and t0 are preserved.
    """
    geometry.check_channels(data)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size < 1:
        raise ChannelIndexError("indices must be a non-empty 1-D list")
    if idx[0] < 0 or idx[-1] >= data.n_channels:
        raise ChannelIndexError(f"index out of range 0..{data.n_channels - 1}")
    if idx.size > 1 and not np.all(np.diff(idx) > 0):
        raise ChannelIndexError("indices must be strictly increasing")
    sub = ChannelData(samples=data.samples[idx], fs_hz=data.fs_hz, t0_s=data.t0_s)
    geo = ArrayGeometry(elements=geometry.elements[idx], descriptor=geometry.descriptor)
    return sub, geo


def add_noise(data: ChannelData, snr: float, seed) -> ChannelData:
    """Additive Gaussian noise with std = peak|signal| / snr. Seeded, reproducible."""
    if snr <= 0:
        raise ValueError(f"snr must be > 0, got {snr}")
    rng = np.random.default_rng(seed)
    peak = float(np.abs(data.samples).max())
    noise = rng.normal(0.0, peak / snr, size=data.samples.shape)
    return ChannelData(samples=(data.samples + noise).astype(np.float32),
                       fs_hz=data.fs_hz, t0_s=data.t0_s)


def phantom_from_config(doc: dict) -> Phantom:
    """Build a Phantom from a config mapping: {sources: [[x, y, amp], ...]}."""
    try:
        return Phantom(sources=tuple(tuple(s) for s in doc["sources"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"bad phantom config: {e}") from e


def medium_from_config(doc: dict) -> MediumModel:
    """Build a MediumModel from a config mapping.

    uniform: {mode: uniform, c_out: 1500}
    dual:    {mode: dual, c_out: 1500, c_in: 1560,
              boundary: {cx, cy, a, b, theta}}
    """
    mode = doc.get("mode", UNIFORM)
    c_out = float(doc.get("c_out", 1500.0))
    if mode == UNIFORM:
        return MediumModel(mode=UNIFORM, c_out_m_s=c_out)
    b = doc.get("boundary")
    if not isinstance(b, dict):
        raise ValueError("dual medium config requires a boundary mapping")
    boundary = Ellipse(cx_mm=float(b["cx"]), cy_mm=float(b["cy"]),
                       a_mm=float(b["a"]), b_mm=float(b["b"]),
                       theta_rad=float(b.get("theta", 0.0)))
    return MediumModel(mode=DUAL, c_out_m_s=c_out, c_in_m_s=float(doc["c_in"]),
                       boundary=boundary)
