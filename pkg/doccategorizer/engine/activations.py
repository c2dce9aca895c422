from enum import Enum

import numpy as np

from doccategorizer.errors import ShapeError

DEFAULT_LEAKY_SLOPE = 0.3


class ActivationKind(str, Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"

    @classmethod
    def parse(cls, value) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        name = str(value).lower().replace("-", "_")
        if name == "leakyrelu":
            name = "leaky_relu"
        return cls(name)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    if x.ndim != 2:
        raise ShapeError(f"softmax expects a (batch, K) tensor, got shape {x.shape}")
    shifted = x - x.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def activate(kind, x: np.ndarray, slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    kind = ActivationKind.parse(kind)
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    if kind is ActivationKind.TANH:
        return np.tanh(x)
    if kind is ActivationKind.SIGMOID:
        return sigmoid(x)
    if kind is ActivationKind.SOFTMAX:
        return softmax(x)
    if kind is ActivationKind.RELU:
        return np.maximum(x, 0).astype(x.dtype, copy=False)
    if slope <= 0:
        raise ValueError(f"leaky_relu slope must be positive, got {slope}")
    return np.where(x >= 0, x, x * x.dtype.type(slope))


def activate_backward(kind, x: np.ndarray, out: np.ndarray, dout: np.ndarray,
                      slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    """Gradient w.r.t. the activation input given the upstream gradient."""
    kind = ActivationKind.parse(kind)
    if kind is ActivationKind.TANH:
        return dout * (1 - out * out)
    if kind is ActivationKind.SIGMOID:
        return dout * out * (1 - out)
    if kind is ActivationKind.SOFTMAX:
        return out * (dout - np.sum(dout * out, axis=1, keepdims=True))
    if kind is ActivationKind.RELU:
        return dout * (x > 0)
    return np.where(x >= 0, dout, dout * x.dtype.type(slope))
