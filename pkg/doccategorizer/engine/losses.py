from enum import Enum

import numpy as np

from doccategorizer.errors import ShapeError

EPSILON_CLIP = 1e-7


class LossKind(str, Enum):
    QUADRATIC = "quadratic"
    BINARY_CROSS_ENTROPY = "binary_cross_entropy"
    CATEGORICAL_CROSS_ENTROPY = "categorical_cross_entropy"


def _check(y_true: np.ndarray, y_pred: np.ndarray):
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"loss shapes differ: y_true {y_true.shape}, y_pred {y_pred.shape}")


def _per_sample(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1).sum(axis=1) if x.ndim > 1 else x


def loss(kind, y_true, y_pred) -> float:
    """Batch-mean loss; every variant sums over outputs and averages over samples."""
    kind = LossKind(kind)
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    _check(y_true, y_pred)
    if kind is LossKind.QUADRATIC:
        return float(0.5 * np.mean(_per_sample((y_true - y_pred) ** 2)))
    a = np.clip(y_pred, EPSILON_CLIP, 1 - EPSILON_CLIP)
    if kind is LossKind.BINARY_CROSS_ENTROPY:
        terms = y_true * np.log(a) + (1 - y_true) * np.log(1 - a)
    else:
        terms = y_true * np.log(a)
    return float(-np.mean(_per_sample(terms)))


def loss_backward(kind, y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    """dE/da for the network output a (unfused path)."""
    kind = LossKind(kind)
    _check(y_true, y_pred)
    n = y_true.shape[0]
    if kind is LossKind.QUADRATIC:
        return (y_pred - y_true) / n
    a = np.clip(y_pred, EPSILON_CLIP, 1 - EPSILON_CLIP)
    if kind is LossKind.BINARY_CROSS_ENTROPY:
        return (a - y_true) / (a * (1 - a)) / n
    return -(y_true / a) / n
