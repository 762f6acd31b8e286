"""Predictors behind the protocol server.

Both predictors expose one call: highest-score mask for a point-prompt
set. The server composes binary mode (one call, all prompts) and
multilabel mode (one call per foreground prompt, overlaps resolved by
higher score, dense relabeling) on top of it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BackendConfig:
    """Launch configuration for the model path.

    mask_selection is fixed to highest-score: the model returns several
    candidate masks per prompt set and the one with the top predicted
    quality score is kept.
    """

    checkpoint_path: str
    model_variant: str = "vit_l"  # free-form provenance label
    device: str = "cpu"
    mask_selection: str = "highest-score"

    def __post_init__(self):
        if not os.path.isfile(self.checkpoint_path):
            raise FileNotFoundError(f"checkpoint not found: {self.checkpoint_path}")
        if self.mask_selection != "highest-score":
            raise ValueError("mask_selection is fixed to 'highest-score'")


class StubPredictor:
    """Identity-threshold stand-in so the protocol suite runs with zero
    model weights: the transported image itself is the score map, the mask
    is `image >= 0.5`, and a prompt's score is the image value under it."""

    backend_label = "stub"

    def predict(self, image: np.ndarray, points, labels):
        fx, fy = next((x, y) for (x, y), lb in zip(points, labels) if lb == 1)
        return image >= 0.5, float(image[fy, fx])


class SamPredictor:
    """Point-prompted Segment Anything inference, highest-score mask."""

    def __init__(self, config: BackendConfig):
        try:
            import torch
            from segment_anything import SamPredictor as _Predictor
            from segment_anything import sam_model_registry
        except ImportError as e:  # pragma: no cover - environment-dependent
            raise RuntimeError(
                "model mode needs the 'sam' extra: pip install 'sam-backend[sam]'"
            ) from e
        torch.manual_seed(0)  # pinned for response determinism
        model = sam_model_registry[config.model_variant](
            checkpoint=config.checkpoint_path)
        model.to(config.device)
        self._torch = torch
        self._predictor = _Predictor(model)
        self._last_image_id = None
        self.backend_label = f"sam_{config.model_variant}"

    def predict(self, image: np.ndarray, points, labels):
        # Grayscale [0,1] -> RGB uint8, embedded once per distinct image.
        image_id = id(image)
        if image_id != self._last_image_id:
            u8 = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
            self._predictor.set_image(np.stack([u8] * 3, axis=-1))
            self._last_image_id = image_id
        with self._torch.inference_mode():
            masks, scores, _ = self._predictor.predict(
                point_coords=np.asarray(points, dtype=np.float64),
                point_labels=np.asarray(labels, dtype=np.int64),
                multimask_output=True,
            )
        best = int(np.argmax(scores))
        return masks[best].astype(bool), float(scores[best])


def load_predictor(stub: bool, config: BackendConfig | None = None):
    if stub:
        return StubPredictor()
    if config is None:
        raise ValueError("model mode requires a BackendConfig")
    return SamPredictor(config)
