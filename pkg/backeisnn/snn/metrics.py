"""Rate decoding, confusion matrices and per-split tallies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from backeisnn.utils.errors import ShapeError


def predict(rate: np.ndarray) -> np.ndarray:
    """Argmax of the mean rate per sample; ties go to the lowest class index."""
    rate = np.asarray(rate)
    if rate.ndim != 2:
        raise ShapeError(f"rates must be [B, classes], got {rate.shape}")
    return np.argmax(rate, axis=1)


def confusion_matrix(predictions: np.ndarray, labels: np.ndarray, classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ShapeError(f"{predictions.shape[0]} predictions for {labels.shape[0]} labels")
    matrix = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(matrix, (labels, predictions), 1)
    return matrix


def accuracy(matrix: np.ndarray) -> float:
    total = int(matrix.sum())
    return float(np.trace(matrix)) / total if total else 0.0


@dataclass
class SplitTally:
    """Loss and confusion counts accumulated over the batches of one split."""

    classes: int
    loss_sum: float = 0.0
    samples: int = 0
    matrix: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.matrix is None:
            self.matrix = np.zeros((self.classes, self.classes), dtype=np.int64)

    def add(self, rate: np.ndarray, labels: np.ndarray, batch_loss: float) -> None:
        """``batch_loss`` is the mean loss of the batch."""
        n = int(np.asarray(labels).shape[0])
        self.matrix += confusion_matrix(predict(rate), labels, self.classes)
        self.loss_sum += float(batch_loss) * n
        self.samples += n

    @property
    def loss(self) -> float:
        return self.loss_sum / self.samples if self.samples else 0.0

    @property
    def accuracy(self) -> float:
        return accuracy(self.matrix)
