"""Segmentation wire-protocol v1 backend: point-prompted Segment Anything
inference behind POST /v1/segment, plus a checkpoint-free stub mode."""

from .predictors import BackendConfig, StubPredictor, load_predictor
from .server import create_app

__all__ = ["BackendConfig", "StubPredictor", "load_predictor", "create_app"]
