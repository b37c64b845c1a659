"""Training harness: cross-entropy over the two-class softmax, Adam, early
stopping on validation loss, best-epoch weight restore.

A training run never touches a test image: batches are drawn exclusively
from the fold's train split, and validation only from its val split.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .dataset import ClassLabel, DatasetManifest, LesionImage
from .folds import FoldAssignment
from .networks import LesionClassifier, ModelConfig, build_classifier, preprocess
from .seeds import derive_seed, rng_from

log = logging.getLogger(__name__)

CLASS_ORDER = (ClassLabel.MONKEYPOX, ClassLabel.OTHERS)
CLASS_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainedModel:
    config: ModelConfig
    fold_index: int
    state_dict: dict
    history: list[EpochStats] = field(default_factory=list)
    version_tag: str = ""
    mean_accuracy: float | None = None

    def __post_init__(self) -> None:
        if not self.version_tag:
            self.version_tag = f"{self.config.backbone_id}-fold{self.fold_index}-{self.config.digest()}"


def _entries_for(ids: set[str], manifest: DatasetManifest) -> list[LesionImage]:
    by_id = manifest.by_id()
    missing = sorted(i for i in ids if i not in by_id)
    if missing:
        raise ValueError(f"split references unknown image_id {missing[0]}")
    return [by_id[i] for i in sorted(ids)]


def _load_batch(entries: list[LesionImage], store) -> np.ndarray:
    return np.stack([e.pixels if e.pixels is not None else store.load(e) for e in entries])


def _eval_split(
    model: LesionClassifier, entries: list[LesionImage], store, batch_size: int
) -> tuple[float, float]:
    loss_fn = nn.CrossEntropyLoss(reduction="sum")
    model.eval()
    total_loss, correct = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(entries), batch_size):
            chunk = entries[i : i + batch_size]
            x = preprocess(_load_batch(chunk, store), model.config.backbone_id)
            y = torch.tensor([CLASS_INDEX[e.label] for e in chunk])
            logits = model(x)
            total_loss += float(loss_fn(logits, y))
            correct += int((logits.argmax(dim=1) == y).sum())
    n = len(entries)
    return total_loss / n, correct / n


def train(
    model: LesionClassifier,
    fold: FoldAssignment,
    manifest: DatasetManifest,
    store,
    config: ModelConfig,
    fold_index: int = 0,
) -> TrainedModel:
    """Fit the classifier on the fold's train split, early-stop on val loss,
    and return the weights of the best-val-loss epoch."""
    train_entries = _entries_for(fold.train, manifest)
    val_entries = _entries_for(fold.val, manifest)
    labels_present = {e.label for e in train_entries}
    for label in CLASS_ORDER:
        if label not in labels_present:
            raise ValueError(f"train split has no {label.value} images")

    torch.manual_seed(derive_seed(config.seed, "train", fold_index) & ((1 << 63) - 1))
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    best_loss = float("inf")
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    best_epoch = 0
    since_best = 0
    history: list[EpochStats] = []

    for epoch in range(1, config.max_epochs + 1):
        order = np.arange(len(train_entries))
        rng_from(config.seed, "shuffle", fold_index, epoch).shuffle(order)
        model.train()
        running_loss, correct = 0.0, 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            chunk = [train_entries[i] for i in order[start : start + config.batch_size]]
            x = preprocess(_load_batch(chunk, store), config.backbone_id)
            y = torch.tensor([CLASS_INDEX[e.label] for e in chunk])
            optimizer.zero_grad()
            logits = model(x)
            loss = loss_fn(logits, y)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            optimizer.step()
            running_loss += float(loss.detach()) * len(chunk)
            correct += int((logits.argmax(dim=1) == y).sum())

        train_loss = running_loss / len(train_entries)
        train_acc = correct / len(train_entries)
        if val_entries:
            val_loss, val_acc = _eval_split(model, val_entries, store, config.batch_size)
        else:
            val_loss, val_acc = float("nan"), float("nan")
        history.append(EpochStats(epoch, train_loss, train_acc, val_loss, val_acc))
        log.debug(
            "epoch %d: train_loss=%.4f train_acc=%.3f val_loss=%.4f val_acc=%.3f",
            epoch, train_loss, train_acc, val_loss, val_acc,
        )

        monitored = val_loss if val_entries else train_loss
        if monitored < best_loss:
            best_loss = monitored
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.early_stop_patience:
                log.info("early stop at epoch %d (best epoch %d)", epoch, best_epoch)
                break

    return TrainedModel(config=config, fold_index=fold_index, state_dict=best_state, history=history)


def instantiate(trained: TrainedModel) -> LesionClassifier:
    model = build_classifier(trained.config)
    model.load_state_dict(trained.state_dict)
    model.eval()
    return model


def save_trained(trained: TrainedModel, directory: Path | str) -> Path:
    """Persist config + weights + history + metadata under one directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    trained.config.to_json(directory / "config.json")
    torch.save(trained.state_dict, directory / "weights.pt")
    lines = ["epoch\ttrain_loss\ttrain_acc\tval_loss\tval_acc"]
    for s in trained.history:
        # repr round-trips floats exactly, so reloads compare clean
        lines.append(f"{s.epoch}\t{s.train_loss!r}\t{s.train_acc!r}\t{s.val_loss!r}\t{s.val_acc!r}")
    (directory / "history.tsv").write_text("\n".join(lines) + "\n")
    meta = {
        "version_tag": trained.version_tag,
        "backbone_id": trained.config.backbone_id,
        "fold_index": trained.fold_index,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    if trained.mean_accuracy is not None:
        meta["mean_accuracy"] = trained.mean_accuracy
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory


def load_trained(directory: Path | str) -> TrainedModel:
    directory = Path(directory)
    config = ModelConfig.from_json(directory / "config.json")
    state = torch.load(directory / "weights.pt", weights_only=True)
    meta = json.loads((directory / "meta.json").read_text())
    history = []
    history_path = directory / "history.tsv"
    if history_path.exists():
        for line in history_path.read_text().splitlines()[1:]:
            epoch, tl, ta, vl, va = line.split("\t")
            history.append(EpochStats(int(epoch), float(tl), float(ta), float(vl), float(va)))
    return TrainedModel(
        config=config,
        fold_index=int(meta.get("fold_index", 0)),
        state_dict=state,
        history=history,
        version_tag=meta["version_tag"],
        mean_accuracy=meta.get("mean_accuracy"),
    )
