"""Classifier assembly: backbones, the FC head, freezing, preprocessing.

The production backbones come from torchvision; ``tiny_test_cnn`` is a
three-block CNN small enough to train on a laptop CPU so the whole pipeline
is exercisable without pretrained weights or accelerators.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .seeds import derive_seed

BACKBONE_IDS = ("vgg16", "resnet50", "inceptionv3", "tiny_test_cnn")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to build and train one classifier."""

    backbone_id: str = "tiny_test_cnn"
    pretrained: bool = False
    trainable_bottom_layers: int = 8
    head_widths: tuple[int, int, int] = (4096, 1072, 256)
    head_dropouts: tuple[float, float, float] = (0.3, 0.2, 0.15)
    output_classes: int = 2
    learning_rate: float = 1e-5
    batch_size: int = 16
    max_epochs: int = 50
    early_stop_patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.backbone_id not in BACKBONE_IDS:
            raise ValueError(f"unknown backbone {self.backbone_id!r}; known: {BACKBONE_IDS}")
        if any(w <= 0 for w in self.head_widths):
            raise ValueError("head_widths must be strictly positive")
        if any(not 0.0 <= d < 1.0 for d in self.head_dropouts):
            raise ValueError("head_dropouts must lie in [0, 1)")
        if len(self.head_widths) != len(self.head_dropouts):
            raise ValueError("head_widths and head_dropouts must have equal length")
        if self.output_classes != 2:
            raise ValueError("output_classes must be 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.trainable_bottom_layers < 0:
            raise ValueError("trainable_bottom_layers must be >= 0")

    def to_json(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path: Path | str) -> "ModelConfig":
        data = json.loads(Path(path).read_text())
        for key in ("head_widths", "head_dropouts"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def digest(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True)
        return f"{derive_seed(canon):016x}"[:8]


def tiny_config(seed: int = 0, **overrides) -> ModelConfig:
    """Desk-scale preset: tiny backbone, scaled-down head, fast optimizer."""
    base = dict(
        backbone_id="tiny_test_cnn",
        pretrained=False,
        head_widths=(64, 32, 16),
        learning_rate=1e-3,
        max_epochs=5,
        early_stop_patience=3,
        seed=seed,
    )
    base.update(overrides)
    return ModelConfig(**base)


class TinyTestCNN(nn.Module):
    """Three small conv blocks; flattened feature length 512."""

    feature_len = 512

    def __init__(self) -> None:
        super().__init__()
        self.blocks = nn.Sequential(
            nn.Conv2d(3, 8, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(8, 16, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(4),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.flatten(self.blocks(x), 1)


class PretrainedWeightsUnavailable(RuntimeError):
    pass


def _load_torchvision_backbone(backbone_id: str, pretrained: bool):
    from torchvision import models

    weight_enums = {
        "vgg16": ("vgg16", "VGG16_Weights"),
        "resnet50": ("resnet50", "ResNet50_Weights"),
        "inceptionv3": ("inception_v3", "Inception_V3_Weights"),
    }
    fn_name, enum_name = weight_enums[backbone_id]
    builder = getattr(models, fn_name)
    weights = getattr(models, enum_name).IMAGENET1K_V1 if pretrained else None
    kwargs = {"weights": weights}
    if backbone_id == "inceptionv3":
        kwargs["aux_logits"] = pretrained  # torchvision demands aux heads with these weights
        if not pretrained:
            kwargs["init_weights"] = True
    try:
        model = builder(**kwargs)
    except Exception as exc:  # download failure, missing cache, network off
        raise PretrainedWeightsUnavailable(
            f"pretrained weights for {backbone_id} are not available locally: {exc}. "
            f"Fetch them once with torchvision on a connected machine, e.g. "
            f"python -c \"from torchvision import models; models.{fn_name}(weights="
            f"models.{enum_name}.IMAGENET1K_V1)\" and copy the torch hub cache "
            f"(~/.cache/torch/hub/checkpoints) here."
        ) from exc
    return model


def build_backbone(backbone_id: str, pretrained: bool = False) -> tuple[nn.Module, int]:
    """Return (feature extractor ending in flatten, flattened feature length)."""
    if backbone_id == "tiny_test_cnn":
        if pretrained:
            raise ValueError("tiny_test_cnn has no pretrained weights")
        return TinyTestCNN(), TinyTestCNN.feature_len
    if backbone_id not in BACKBONE_IDS:
        raise ValueError(f"unknown backbone {backbone_id!r}; known: {BACKBONE_IDS}")
    model = _load_torchvision_backbone(backbone_id, pretrained)
    if backbone_id == "vgg16":
        model.classifier = nn.Identity()
        return model, 25088
    if backbone_id == "resnet50":
        model.fc = nn.Identity()
        return model, 2048
    # inceptionv3
    model.fc = nn.Identity()
    if getattr(model, "AuxLogits", None) is not None:
        model.AuxLogits = None
        model.aux_logits = False
    return model, 2048


def build_head(
    in_features: int,
    widths: tuple[int, ...],
    dropouts: tuple[float, ...],
    n_classes: int,
    seed: int,
) -> nn.Sequential:
    """Flatten -> [FC+ReLU+Dropout]*3 -> FC(n_classes). Weights and biases are
    drawn from a seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    gen = torch.Generator().manual_seed(seed & ((1 << 63) - 1))
    layers: list[nn.Module] = []
    fan_in = in_features
    for width, dropout in zip(widths, dropouts):
        layers += [nn.Linear(fan_in, width), nn.ReLU(inplace=True), nn.Dropout(dropout)]
        fan_in = width
    layers.append(nn.Linear(fan_in, n_classes))
    head = nn.Sequential(*layers)
    with torch.no_grad():
        for module in head:
            if isinstance(module, nn.Linear):
                bound = 1.0 / math.sqrt(module.in_features)
                module.weight.uniform_(-bound, bound, generator=gen)
                module.bias.uniform_(-bound, bound, generator=gen)
    return head


def head_param_count(in_features: int, widths: tuple[int, ...], n_classes: int = 2) -> int:
    count = 0
    fan_in = in_features
    for width in widths:
        count += fan_in * width + width
        fan_in = width
    return count + fan_in * n_classes + n_classes


def weighted_layers(module: nn.Module) -> list[nn.Module]:
    """Leaf modules carrying a weight parameter, in forward traversal order."""
    return [
        m
        for m in module.modules()
        if isinstance(getattr(m, "weight", None), nn.Parameter)
    ]


class LesionClassifier(nn.Module):
    """Backbone feature extractor plus the FC classifier head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        # Module constructors draw initial weights from the global RNG; pin it
        # so identical configs always yield identical models.
        torch.manual_seed(derive_seed(config.seed, "backbone-init", config.backbone_id) & ((1 << 63) - 1))
        self.backbone, self.feature_len = build_backbone(config.backbone_id, config.pretrained)
        self.head = build_head(
            self.feature_len,
            config.head_widths,
            config.head_dropouts,
            config.output_classes,
            derive_seed(config.seed, "head-init", config.backbone_id),
        )
        self._freeze_backbone(config.trainable_bottom_layers)

    def _freeze_backbone(self, trainable_bottom_layers: int) -> None:
        for param in self.backbone.parameters():
            param.requires_grad_(False)
        layers = weighted_layers(self.backbone)
        # "bottom" = the weighted layers nearest the backbone output.
        for layer in layers[len(layers) - trainable_bottom_layers :] if trainable_bottom_layers else []:
            for param in layer.parameters():
                param.requires_grad_(True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))

    def predict_proba(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=1)


def build_classifier(config: ModelConfig) -> LesionClassifier:
    return LesionClassifier(config)


def preprocess(pixels: np.ndarray, backbone_id: str) -> torch.Tensor:
    """uint8 NHWC (or HWC) -> float32 NCHW in each backbone's input scale."""
    arr = np.asarray(pixels)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(f"expected NxHxWx3 pixels, got {arr.shape}")
    arr = np.ascontiguousarray(arr)
    if not arr.flags.writeable:  # PIL-backed arrays are read-only
        arr = arr.copy()
    x = torch.from_numpy(arr).float().div_(255.0)
    x = x.permute(0, 3, 1, 2)
    if backbone_id != "tiny_test_cnn":
        mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
        x = (x - mean) / std
    return x
