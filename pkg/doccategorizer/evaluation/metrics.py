"""Confusion matrices and precision/recall/F1/accuracy with macro and micro averaging.

A ratio whose denominator is zero is defined as 0, and so is F1 when
precision + recall is 0.
"""
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel

from doccategorizer.errors import ShapeError

MULTI_CLASS = "multi_class"
MULTI_LABEL = "multi_label"


class ConfusionMatrix:
    """K×K counts where cell[p][a] is the number of items predicted p with actual class a."""

    def __init__(self, cell: np.ndarray):
        cell = np.asarray(cell, dtype=np.int64)
        if cell.ndim != 2 or cell.shape[0] != cell.shape[1]:
            raise ShapeError(f"a confusion matrix is square, got {cell.shape}")
        if (cell < 0).any():
            raise ValueError("confusion counts cannot be negative")
        self.cell = cell

    @property
    def k(self) -> int:
        return self.cell.shape[0]

    @property
    def total(self) -> int:
        return int(self.cell.sum())

    # Diagonal is TP; the rest of a predicted row is FP; the rest of an actual column is FN.
    def tp(self) -> np.ndarray:
        return np.diag(self.cell).copy()

    def fp(self) -> np.ndarray:
        return self.cell.sum(axis=1) - self.tp()

    def fn(self) -> np.ndarray:
        return self.cell.sum(axis=0) - self.tp()

    def tn(self) -> np.ndarray:
        return self.total - self.tp() - self.fp() - self.fn()

    def to_list(self) -> List[List[int]]:
        return self.cell.tolist()


def confusion(y_true: Sequence[int], y_pred: Sequence[int], k: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"{y_true.size} actual labels but {y_pred.size} predictions")
    for name, labels in (("actual", y_true), ("predicted", y_pred)):
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise ValueError(f"{name} labels must lie in [0, {k})")
    cell = np.zeros((k, k), dtype=np.int64)
    np.add.at(cell, (y_pred, y_true), 1)
    return ConfusionMatrix(cell)


class ClassMetrics(BaseModel):
    tp: int
    tn: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float


class MetricsReport(BaseModel):
    n: int
    classes: List[ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    accuracy: float

    def aggregates(self) -> dict:
        return self.model_dump(exclude={"classes", "n"})


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    return 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def _report(tp, tn, fp, fn, n: int, correct: int) -> MetricsReport:
    classes = []
    for i in range(len(tp)):
        p = _ratio(tp[i], tp[i] + fp[i])
        r = _ratio(tp[i], tp[i] + fn[i])
        classes.append(ClassMetrics(
            tp=int(tp[i]), tn=int(tn[i]), fp=int(fp[i]), fn=int(fn[i]),
            precision=p, recall=r, f1=f1_score(p, r), accuracy=_ratio(tp[i] + tn[i], n),
        ))
    k = len(classes)
    micro_p = _ratio(sum(tp), sum(tp) + sum(fp))
    micro_r = _ratio(sum(tp), sum(tp) + sum(fn))
    return MetricsReport(
        n=n,
        classes=classes,
        macro_precision=_ratio(sum(c.precision for c in classes), k),
        macro_recall=_ratio(sum(c.recall for c in classes), k),
        macro_f1=_ratio(sum(c.f1 for c in classes), k),
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=f1_score(micro_p, micro_r),
        accuracy=_ratio(correct, n),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    return _report(cm.tp().tolist(), cm.tn().tolist(), cm.fp().tolist(), cm.fn().tolist(),
                   cm.total, int(np.trace(cm.cell)))


def metrics_from_indicators(y_true, y_pred) -> MetricsReport:
    """Per-class binary counts over N×K indicator matrices; accuracy is the exact-match ratio."""
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    if y_true.shape != y_pred.shape or y_true.ndim != 2:
        raise ShapeError(f"indicator matrices differ: {y_true.shape} vs {y_pred.shape}")
    tp = (y_true & y_pred).sum(axis=0)
    fp = (~y_true & y_pred).sum(axis=0)
    fn = (y_true & ~y_pred).sum(axis=0)
    n = y_true.shape[0]
    tn = n - tp - fp - fn
    correct = int((y_true == y_pred).all(axis=1).sum())
    return _report(tp.tolist(), tn.tolist(), fp.tolist(), fn.tolist(), n, correct)


def binarize(probs, mode: str = MULTI_CLASS, threshold: float = 0.5) -> np.ndarray:
    """Turn a probability matrix into an N×K 0/1 indicator matrix.

    multi_class marks the argmax of every row (lowest index on ties);
    multi_label marks every class whose probability reaches threshold.
    """
    probs = np.asarray(probs)
    if probs.ndim != 2:
        raise ShapeError(f"probabilities must be an N×K matrix, got {probs.shape}")
    if mode == MULTI_CLASS:
        out = np.zeros(probs.shape, dtype=np.int8)
        if probs.shape[0]:
            out[np.arange(probs.shape[0]), np.argmax(probs, axis=1)] = 1
        return out
    if mode == MULTI_LABEL:
        return (probs >= threshold).astype(np.int8)
    raise ValueError(f"unknown mode {mode!r}")


def indicator_labels(indicators) -> List[List[int]]:
    return [np.flatnonzero(row).tolist() for row in np.asarray(indicators)]


def score_predictions(y_true, probs, mode: str = MULTI_CLASS) -> MetricsReport:
    """Metrics of a probability matrix against an indicator matrix."""
    predicted = binarize(probs, mode)
    y_true = np.asarray(y_true)
    if mode == MULTI_CLASS:
        k = y_true.shape[1]
        return metrics(confusion(np.argmax(y_true, axis=1), np.argmax(predicted, axis=1), k))
    return metrics_from_indicators(y_true, predicted)
