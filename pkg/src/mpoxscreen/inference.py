"""Deterministic inference: softmax probabilities and argmax labels.

Ties break toward Monkeypox (the screening-sensitive choice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .dataset import IMAGE_SIZE, ClassLabel, LesionImage
from .networks import LesionClassifier, preprocess
from .training import CLASS_ORDER, TrainedModel, instantiate


@dataclass
class Prediction:
    image_id: str
    probabilities: np.ndarray  # (2,) over (Monkeypox, Others)
    predicted_label: ClassLabel


@dataclass
class PredictionBatch:
    predictions: list[Prediction]

    def __len__(self) -> int:
        return len(self.predictions)

    def pairs(self) -> list[tuple[str, ClassLabel]]:
        return [(p.image_id, p.predicted_label) for p in self.predictions]

    def by_id(self) -> dict[str, Prediction]:
        return {p.image_id: p for p in self.predictions}


def label_from_probabilities(probs: np.ndarray) -> ClassLabel:
    # argmax with the declared tie rule: equal probabilities -> Monkeypox.
    return CLASS_ORDER[0] if probs[0] >= probs[1] else CLASS_ORDER[1]


def predict(
    model: LesionClassifier | TrainedModel,
    images: list[LesionImage],
    store=None,
    batch_size: int = 16,
) -> PredictionBatch:
    """Run dropout-free inference; output order matches input order."""
    if isinstance(model, TrainedModel):
        model = instantiate(model)
    model.eval()
    pixel_list = []
    for entry in images:
        pixels = entry.pixels if entry.pixels is not None else store.load(entry)
        if pixels.shape != (IMAGE_SIZE, IMAGE_SIZE, 3):
            raise ValueError(
                f"image {entry.image_id}: expected {IMAGE_SIZE}x{IMAGE_SIZE}x3, got {pixels.shape}"
            )
        pixel_list.append(pixels)

    predictions: list[Prediction] = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            chunk = images[start : start + batch_size]
            x = preprocess(np.stack(pixel_list[start : start + batch_size]), model.config.backbone_id)
            probs = torch.softmax(model(x), dim=1).numpy().astype(np.float64)
            for entry, p in zip(chunk, probs):
                predictions.append(
                    Prediction(
                        image_id=entry.image_id,
                        probabilities=p,
                        predicted_label=label_from_probabilities(p),
                    )
                )
    return PredictionBatch(predictions=predictions)


def predict_pixels(model: LesionClassifier, pixels: np.ndarray) -> np.ndarray:
    """Probabilities for one bare 224x224x3 array (the service path)."""
    with torch.no_grad():
        x = preprocess(pixels, model.config.backbone_id)
        return torch.softmax(model(x), dim=1).numpy().astype(np.float64)[0]
