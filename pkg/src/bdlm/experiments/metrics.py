"""Accuracy and confusion-matrix computation with a fixed class order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch
from ..signals import FaultLabel

# Fixed presentation order: ball, inner, normal, outer.
CLASS_ORDER = (FaultLabel.RollingElement, FaultLabel.InnerRace,
               FaultLabel.Normal, FaultLabel.OuterRace)


def label_space_of(segments) -> tuple[FaultLabel, ...]:
    """Labels present in the data, in canonical display order."""
    present = {s.label for s in segments}
    return tuple(label for label in CLASS_ORDER if label in present)


@dataclass
class ConfusionMatrix:
    """counts[i, j] = segments of true class i predicted as class j."""

    counts: np.ndarray
    labels: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        total = int(self.counts.sum())
        return float(np.trace(self.counts)) / total if total else 0.0

    def to_dict(self) -> dict:
        return {"labels": list(self.labels),
                "counts": [[int(v) for v in row] for row in self.counts]}


def compute_metrics(y_true, y_pred, labels: tuple[str, ...]):
    """Returns (accuracy, ConfusionMatrix) for integer class indices."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(
            f"predictions ({y_pred.size}) and labels ({y_true.size}) differ in length",
            n_true=y_true.size, n_pred=y_pred.size)
    c = len(labels)
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    accuracy = float(np.mean(y_true == y_pred)) if y_true.size else 0.0
    return accuracy, ConfusionMatrix(counts=counts, labels=tuple(labels))
