"""Confusion matrices, the four reported metrics, majority voting, and
cross-fold mean +/- std reporting.

Monkeypox is the positive class throughout. Degenerate 0/0 metric cases are
defined as 0 and flagged with a warning so reports stay total.
"""

from __future__ import annotations

import statistics
import warnings
from dataclasses import dataclass, fields

from .dataset import ClassLabel

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")

DISPLAY_NAMES = {
    "vgg16": "VGG16",
    "resnet50": "ResNet50",
    "inceptionv3": "InceptionV3",
    "tiny_test_cnn": "TinyTestCNN",
    "ensemble": "Ensemble",
}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def flipped(self) -> "ConfusionMatrix":
        """The same counts with Others treated as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion_matrix(predictions, truth: dict[str, ClassLabel]) -> ConfusionMatrix:
    """Count tp/fp/fn/tn with Monkeypox positive.

    ``predictions`` is an iterable of (image_id, predicted label) pairs or
    anything exposing ``pairs()`` (e.g. a PredictionBatch).
    """
    if hasattr(predictions, "pairs"):
        predictions = predictions.pairs()
    tp = fp = fn = tn = 0
    seen: set[str] = set()
    for image_id, predicted in predictions:
        if image_id in seen:
            raise ValueError(f"duplicate prediction for image_id {image_id}")
        seen.add(image_id)
        if image_id not in truth:
            raise ValueError(f"no truth label for image_id {image_id}")
        actual = truth[image_id]
        positive = ClassLabel.MONKEYPOX
        if predicted == positive and actual == positive:
            tp += 1
        elif predicted == positive and actual != positive:
            fp += 1
        elif predicted != positive and actual == positive:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def _ratio(num: int, den: int, name: str) -> float:
    if den == 0:
        warnings.warn(f"{name} is 0/0; defined as 0", stacklevel=3)
        return 0.0
    return num / den


def compute_metrics(cm: ConfusionMatrix) -> MetricSet:
    """accuracy, precision, recall, and harmonic-mean F1 from one matrix."""
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    return MetricSet(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=_ratio(cm.tp, cm.tp + cm.fp, "precision"),
        recall=_ratio(cm.tp, cm.tp + cm.fn, "recall"),
        # algebraically 2pr/(p+r); the integer form divides exactly once
        f1=_ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "f1"),
    )


def compute_metrics_macro(cm: ConfusionMatrix) -> MetricSet:
    """Unweighted mean of the per-class metrics over both orientations."""
    pos = compute_metrics(cm)
    neg = compute_metrics(cm.flipped())
    return MetricSet(
        accuracy=pos.accuracy,
        precision=(pos.precision + neg.precision) / 2,
        recall=(pos.recall + neg.recall) / 2,
        f1=(pos.f1 + neg.f1) / 2,
    )


def majority_vote(votes: list[ClassLabel]) -> ClassLabel:
    """Label held by at least 2 of exactly 3 voters."""
    if len(votes) != 3:
        raise ValueError(f"majority_vote requires exactly 3 votes, got {len(votes)}")
    count_mpx = sum(1 for v in votes if v == ClassLabel.MONKEYPOX)
    return ClassLabel.MONKEYPOX if count_mpx >= 2 else ClassLabel.OTHERS


def majority_vote_batch(votes_by_image: dict[str, list[ClassLabel]]) -> dict[str, ClassLabel]:
    return {image_id: majority_vote(v) for image_id, v in votes_by_image.items()}


@dataclass
class NetworkResult:
    per_fold: list[MetricSet]
    mean: MetricSet
    std: MetricSet


@dataclass
class EvaluationReport:
    networks: dict[str, NetworkResult]


def aggregate_folds(per_fold: dict[str, list[MetricSet]], n_folds: int = 3) -> EvaluationReport:
    """Mean and sample standard deviation (n-1) of each metric across folds."""
    results: dict[str, NetworkResult] = {}
    for network, metric_sets in per_fold.items():
        if len(metric_sets) != n_folds:
            raise ValueError(
                f"network {network}: expected {n_folds} folds, got {len(metric_sets)}"
            )
        means = {}
        stds = {}
        for name in METRIC_NAMES:
            values = [getattr(m, name) for m in metric_sets]
            means[name] = statistics.mean(values)
            stds[name] = statistics.stdev(values)
        results[network] = NetworkResult(
            per_fold=list(metric_sets), mean=MetricSet(**means), std=MetricSet(**stds)
        )
    return EvaluationReport(networks=results)


def _cell(mean: float, std: float, percent: bool) -> str:
    if percent:
        return f"{mean * 100:.2f} ± {std * 100:.2f}"
    return f"{mean:.2f} ± {std:.2f}"


def render_table(report: EvaluationReport) -> str:
    """Fixed-width text table: Network | Accuracy (%) | Precision | Recall | F1 score."""
    header = ("Network", "Accuracy (%)", "Precision", "Recall", "F1 score")
    rows = [header]
    for network, result in report.networks.items():
        rows.append(
            (
                DISPLAY_NAMES.get(network, network),
                _cell(result.mean.accuracy, result.std.accuracy, percent=True),
                _cell(result.mean.precision, result.std.precision, percent=False),
                _cell(result.mean.recall, result.std.recall, percent=False),
                _cell(result.mean.f1, result.std.f1, percent=False),
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def render_numeric(report: EvaluationReport, scope: str = "positive") -> str:
    """Line-delimited numeric form: scope, network, metric, folds..., mean, std."""
    lines = []
    for network, result in report.networks.items():
        for name in METRIC_NAMES:
            folds = "\t".join(f"{getattr(m, name):.6f}" for m in result.per_fold)
            lines.append(
                f"{scope}\t{network}\t{name}\t{folds}\t"
                f"{getattr(result.mean, name):.6f}\t{getattr(result.std, name):.6f}"
            )
    return "\n".join(lines) + "\n"
