"""Detection metrics: accuracy, macro F1, false-positive rate, deltas."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from agids.errors import LengthMismatch
from agids.flows import ClassLabel


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1_macro: float
    fpr: float
    per_class: dict[ClassLabel, ClassScores]
    confusion: tuple[tuple[int, ...], ...]

    @property
    def attack_recall(self) -> dict[ClassLabel, float]:
        """Recall of each attack class present in the evaluated labels."""
        return {c: s.recall for c, s in self.per_class.items() if c != ClassLabel.BENIGN and s.support}

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "fpr": self.fpr,
            "per_class": {
                c.display: {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for c, s in self.per_class.items()
            },
            "confusion": [list(r) for r in self.confusion],
        }


def confusion_matrix(pred, truth, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(truth, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def evaluate(pred, truth, n_classes: int | None = None) -> Metrics:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise LengthMismatch(len(pred), len(truth))
    if len(truth) == 0:
        raise ValueError("cannot evaluate zero predictions")
    n_classes = n_classes or max(len(ClassLabel), int(max(pred.max(), truth.max())) + 1)
    cm = confusion_matrix(pred, truth, n_classes)
    total = cm.sum()
    per_class = {}
    f1s = []
    for c in range(n_classes):
        tp = cm[c, c]
        predicted = cm[:, c].sum()
        support = cm[c, :].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[ClassLabel(c)] = ClassScores(float(precision), float(recall), float(f1), int(support))
        if support:
            f1s.append(f1)
    benign = int(ClassLabel.BENIGN)
    n_benign = cm[benign, :].sum()
    fpr = (n_benign - cm[benign, benign]) / n_benign if n_benign else 0.0
    return Metrics(
        accuracy=float(np.trace(cm) / total),
        f1_macro=float(np.mean(f1s)),
        fpr=float(fpr),
        per_class=per_class,
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
    )


@dataclass(frozen=True)
class MetricsDelta:
    d_accuracy: float
    d_f1: float
    d_fpr: float

    @property
    def improved(self) -> bool:
        return self.d_accuracy > 0 and self.d_f1 > 0 and self.d_fpr < 0

    def to_dict(self) -> dict:
        return {"d_accuracy": self.d_accuracy, "d_f1": self.d_f1, "d_fpr": self.d_fpr}


def delta(baseline: Metrics, refined: Metrics) -> MetricsDelta:
    return MetricsDelta(
        refined.accuracy - baseline.accuracy,
        refined.f1_macro - baseline.f1_macro,
        refined.fpr - baseline.fpr,
    )
