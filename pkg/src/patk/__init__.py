"""Segmentation-guided photoacoustic image processing toolkit.

Point-prompted segmentation (built-in classical segmenter or any backend
speaking the segmentation wire protocol) feeding three downstream
processing paths: skin-band suppression, dual speed-of-sound
reconstruction through a fitted body ellipse, and vessel refinement by
region area and intensity.
"""

from .core import (
    ArrayGeometry,
    ChannelData,
    Ellipse,
    Image2D,
    ImageGrid,
    LabelMask,
    PromptPoint,
    RegionStats,
    Volume3D,
    pixel_to_world,
    world_to_pixel,
)
from .containers import read_container, write_container
from .forward import (
    MediumModel,
    Phantom,
    add_noise,
    ring_array,
    simulate,
    subset_channels,
    wavelet,
)
from .recon import das_reconstruct, expand_sparse_channels, sample_channel
from .dualsos import (
    das_dual_sos,
    fit_ellipse_from_mask,
    inside_length,
    tof_dual,
)
from .maskops import (
    VesselCriteria,
    apply_mask,
    connected_components,
    mip,
    refine_vessels,
    region_stats,
    skin_band_mask,
    stack_volume,
    upper_boundary,
)
from .segment import (
    BuiltinParams,
    SegmentRequest,
    SegmentResult,
    builtin_segment,
    remote_segment,
)
from .pipeline import load_config, run_pipeline, validate_config
from . import errors

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "BuiltinParams",
    "ChannelData",
    "Ellipse",
    "Image2D",
    "ImageGrid",
    "LabelMask",
    "MediumModel",
    "Phantom",
    "PromptPoint",
    "RegionStats",
    "SegmentRequest",
    "SegmentResult",
    "VesselCriteria",
    "Volume3D",
    "add_noise",
    "apply_mask",
    "builtin_segment",
    "connected_components",
    "das_dual_sos",
    "das_reconstruct",
    "errors",
    "expand_sparse_channels",
    "fit_ellipse_from_mask",
    "inside_length",
    "load_config",
    "mip",
    "pixel_to_world",
    "read_container",
    "refine_vessels",
    "region_stats",
    "remote_segment",
    "ring_array",
    "run_pipeline",
    "sample_channel",
    "simulate",
    "skin_band_mask",
    "stack_volume",
    "subset_channels",
    "tof_dual",
    "upper_boundary",
    "validate_config",
    "wavelet",
    "world_to_pixel",
    "write_container",
]
