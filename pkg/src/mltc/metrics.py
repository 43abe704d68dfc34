"""Confusion-matrix classification metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray  # [true, predicted]

    @property
    def num_classes(self) -> int:
        return self.confusion.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Metrics):
            return NotImplemented
        return (np.array_equal(self.confusion, other.confusion)
                and self.accuracy == other.accuracy and self.macro_f1 == other.macro_f1
                and self.macro_recall == other.macro_recall
                and self.macro_precision == other.macro_precision
                and np.array_equal(self.f1, other.f1))

    def tsv_rows(self, variant: str) -> list:
        rows = [f"{variant}\t{self.accuracy!r}\t{self.macro_f1!r}\t{self.macro_recall!r}\t{self.macro_precision!r}"]
        for c in range(self.num_classes):
            rows.append(f"{variant}/class{c}\t\t{float(self.f1[c])!r}\t{float(self.recall[c])!r}\t{float(self.precision[c])!r}")
        return rows


METRICS_HEADER = "variant\taccuracy\tmacro_f1\tmacro_recall\tmacro_precision"


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.where(den > 0, num / np.where(den > 0, den, 1), 0.0)


def metrics_from_confusion(cm: np.ndarray) -> Metrics:
    cm = np.asarray(cm, dtype=np.int64)
    tp = np.diag(cm).astype(np.float64)
    precision = _safe_div(tp, cm.sum(axis=0).astype(np.float64))
    recall = _safe_div(tp, cm.sum(axis=1).astype(np.float64))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    total = cm.sum()
    acc = float(tp.sum() / total) if total else 0.0
    return Metrics(acc, precision, recall, f1, float(precision.mean()), float(recall.mean()),
                   float(f1.mean()), cm)


def compute_metrics(y_true, y_pred, num_classes: int) -> Metrics:
    return metrics_from_confusion(confusion_matrix(y_true, y_pred, num_classes))


def argmax_lowest(logits: np.ndarray) -> np.ndarray:
    # np.argmax already returns the first maximal index
    return np.argmax(np.asarray(logits), axis=-1)
