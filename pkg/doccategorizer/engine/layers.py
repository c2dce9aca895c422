"""Layer implementations of the feed-forward engine.

Every layer is split into a pure ``forward`` that returns ``(out, cache)`` and
a ``backward`` that turns the upstream gradient and that cache into input
gradients plus parameter gradients. Parameters live on the layer; the cache
never does, so an eval-mode network can serve concurrent forward passes.
"""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from doccategorizer.engine.activations import (
    DEFAULT_LEAKY_SLOPE,
    ActivationKind,
    activate,
    activate_backward,
)
from doccategorizer.errors import SequenceTooShortError, ShapeError

Shape = Tuple[int, ...]


def glorot_uniform(rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    type_name = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}

    def output_shape(self, input_shapes: Sequence[Shape]) -> Shape:
        return self._single(input_shapes)

    def build(self, input_shapes: Sequence[Shape], rng: np.random.Generator, dtype) -> None:
        pass

    def forward(self, inputs: List[np.ndarray], training: bool, rng: Optional[np.random.Generator]):
        raise NotImplementedError

    def backward(self, dout: np.ndarray, cache) -> Tuple[List[np.ndarray], Dict[str, np.ndarray]]:
        raise NotImplementedError

    def config(self) -> dict:
        return {}

    @classmethod
    def from_config(cls, config: dict) -> "Layer":
        return cls(**config)

    def _single(self, input_shapes: Sequence[Shape]) -> Shape:
        if len(input_shapes) != 1:
            raise ShapeError(f"{self.type_name} takes exactly one input, got {len(input_shapes)}")
        return tuple(input_shapes[0])


class Dense(Layer):
    type_name = "dense"

    def __init__(self, units: int):
        super().__init__()
        if units < 1:
            raise ShapeError(f"dense units must be positive, got {units}")
        self.units = units

    def output_shape(self, input_shapes):
        shape = self._single(input_shapes)
        if len(shape) != 1:
            raise ShapeError(f"dense expects flat inputs, got per-sample shape {shape}")
        return (self.units,)

    def build(self, input_shapes, rng, dtype):
        self.output_shape(input_shapes)
        fan_in = input_shapes[0][0]
        self.params["W"] = glorot_uniform(rng, (self.units, fan_in), fan_in, self.units, dtype)
        self.params["b"] = np.zeros(self.units, dtype=dtype)

    def forward(self, inputs, training, rng):
        x = inputs[0]
        W = self.params["W"]
        if x.ndim != 2 or x.shape[1] != W.shape[1]:
            raise ShapeError(f"dense input {x.shape} does not match weights {W.shape}")
        return x @ W.T + self.params["b"], x

    def backward(self, dout, cache):
        x = cache
        return [dout @ self.params["W"]], {"W": dout.T @ x, "b": dout.sum(axis=0)}

    def config(self):
        return {"units": self.units}


class Conv1D(Layer):
    """Valid, stride-1 convolution whose filters span the whole word vector."""

    type_name = "conv1d"

    def __init__(self, filter_count: int, filter_len: int):
        super().__init__()
        if filter_count < 1 or filter_len < 1:
            raise ShapeError(f"conv1d needs positive filter_count/filter_len, got {filter_count}/{filter_len}")
        self.filter_count = filter_count
        self.filter_len = filter_len

    def output_shape(self, input_shapes):
        shape = self._single(input_shapes)
        if len(shape) != 2:
            raise ShapeError(f"conv1d expects (timesteps, dim) samples, got {shape}")
        if shape[0] < self.filter_len:
            raise SequenceTooShortError(
                f"sequence of length {shape[0]} is shorter than filter length {self.filter_len}")
        return (shape[0] - self.filter_len + 1, self.filter_count)

    def build(self, input_shapes, rng, dtype):
        self.output_shape(input_shapes)
        dim = input_shapes[0][1]
        fan_in = self.filter_len * dim
        self.params["W"] = glorot_uniform(rng, (self.filter_count, fan_in), fan_in, self.filter_count, dtype)
        self.params["b"] = np.zeros(self.filter_count, dtype=dtype)

    def _filter_slices(self, dim: int):
        W = self.params["W"]
        if W.shape[1] != self.filter_len * dim:
            raise ShapeError(f"conv1d filters {W.shape} do not match word vectors of size {dim}")
        return [W[:, j * dim:(j + 1) * dim] for j in range(self.filter_len)]

    def forward(self, inputs, training, rng):
        x = inputs[0]
        if x.ndim != 3:
            raise ShapeError(f"conv1d expects (batch, timesteps, dim), got {x.shape}")
        length = x.shape[1]
        if length < self.filter_len:
            raise SequenceTooShortError(
                f"sequence of length {length} is shorter than filter length {self.filter_len}")
        positions = length - self.filter_len + 1
        out = np.broadcast_to(self.params["b"], (x.shape[0], positions, self.filter_count)).copy()
        # filter k at position p sees flatten(x[p:p+f]); slice j of W covers row p+j
        for j, Wj in enumerate(self._filter_slices(x.shape[2])):
            out += x[:, j:j + positions, :] @ Wj.T
        return out, x

    def backward(self, dout, cache):
        x = cache
        positions = dout.shape[1]
        dx = np.zeros_like(x)
        dW = np.empty_like(self.params["W"])
        dim = x.shape[2]
        for j, Wj in enumerate(self._filter_slices(dim)):
            window = x[:, j:j + positions, :]
            dW[:, j * dim:(j + 1) * dim] = np.einsum("npk,npv->kv", dout, window)
            dx[:, j:j + positions, :] += dout @ Wj
        return [dx], {"W": dW, "b": dout.sum(axis=(0, 1))}

    def config(self):
        return {"filter_count": self.filter_count, "filter_len": self.filter_len}


class MaxOverTime(Layer):
    type_name = "max_over_time"

    def output_shape(self, input_shapes):
        shape = self._single(input_shapes)
        if len(shape) != 2:
            raise ShapeError(f"max_over_time expects (timesteps, features) samples, got {shape}")
        return (shape[1],)

    def forward(self, inputs, training, rng):
        x = inputs[0]
        if x.ndim != 3 or x.shape[1] < 1:
            raise ShapeError(f"max_over_time expects a non-empty (batch, timesteps, features) tensor, got {x.shape}")
        # np.argmax returns the first index on ties
        idx = np.argmax(x, axis=1)
        out = np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0, :]
        return out, (x.shape, idx)

    def backward(self, dout, cache):
        shape, idx = cache
        dx = np.zeros(shape, dtype=dout.dtype)
        np.put_along_axis(dx, idx[:, None, :], dout[:, None, :], axis=1)
        return [dx], {}


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time."""

    type_name = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.frozen = False
        self.mask: Optional[np.ndarray] = None

    def _sample_mask(self, shape, dtype, rng) -> np.ndarray:
        if self.frozen and self.mask is not None and self.mask.shape == shape:
            return self.mask.astype(dtype, copy=False)
        keep = rng.random(shape) >= self.rate
        mask = keep.astype(dtype) / dtype.type(1.0 - self.rate)
        if self.frozen:
            self.mask = mask
        return mask

    def forward(self, inputs, training, rng):
        x = inputs[0]
        if not training or self.rate == 0.0:
            return x, None
        mask = self._sample_mask(x.shape, x.dtype, rng)
        return x * mask, mask

    def backward(self, dout, cache):
        return [dout if cache is None else dout * cache], {}

    def config(self):
        return {"rate": self.rate}


class Activation(Layer):
    type_name = "activation"

    def __init__(self, kind, slope: float = DEFAULT_LEAKY_SLOPE):
        super().__init__()
        self.kind = ActivationKind.parse(kind)
        if self.kind is ActivationKind.LEAKY_RELU and slope <= 0:
            raise ValueError(f"leaky_relu slope must be positive, got {slope}")
        self.slope = slope

    def output_shape(self, input_shapes):
        shape = self._single(input_shapes)
        if self.kind is ActivationKind.SOFTMAX and len(shape) != 1:
            raise ShapeError(f"softmax expects flat (batch, K) inputs, got per-sample shape {shape}")
        return shape

    def forward(self, inputs, training, rng):
        x = inputs[0]
        out = activate(self.kind, x, self.slope)
        return out, (x, out)

    def backward(self, dout, cache):
        x, out = cache
        return [activate_backward(self.kind, x, out, dout, self.slope)], {}

    def config(self):
        return {"kind": self.kind.value, "slope": self.slope}


class Concat(Layer):
    """Concatenates flat branch outputs along the feature axis."""

    type_name = "concat"

    def output_shape(self, input_shapes):
        if not input_shapes:
            raise ShapeError("concat needs at least one input")
        for shape in input_shapes:
            if len(shape) != 1:
                raise ShapeError(f"concat expects flat branch outputs, got {shape}")
        return (sum(shape[0] for shape in input_shapes),)

    def forward(self, inputs, training, rng):
        return np.concatenate(inputs, axis=1), [x.shape[1] for x in inputs]

    def backward(self, dout, cache):
        splits = np.cumsum(cache)[:-1]
        return list(np.split(dout, splits, axis=1)), {}


LAYER_TYPES = {cls.type_name: cls for cls in (Dense, Conv1D, MaxOverTime, Dropout, Activation, Concat)}


def _as_batch(x: np.ndarray, ndim: int) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == ndim - 1:
        return x[None, ...], True
    return x, False


def dense_forward(layer: Dense, x: np.ndarray) -> np.ndarray:
    batch, single = _as_batch(x, 2)
    out, _ = layer.forward([batch], False, None)
    return out[0] if single else out


def conv1d_forward(layer: Conv1D, seq: np.ndarray) -> np.ndarray:
    """Apply a conv1d layer to one L×|v| sequence or a batch of them."""
    batch, single = _as_batch(seq, 3)
    out, _ = layer.forward([batch], False, None)
    return out[0] if single else out


def max_over_time(seq: np.ndarray) -> np.ndarray:
    batch, single = _as_batch(seq, 3)
    if batch.shape[1] == 0:
        raise ShapeError("max_over_time of an empty sequence")
    out, _ = MaxOverTime().forward([batch], False, None)
    return out[0] if single else out


def dropout_forward(layer: Dropout, x: np.ndarray, mode: str, rng: np.random.Generator) -> np.ndarray:
    out, _ = layer.forward([np.asarray(x)], mode == "train", rng)
    return out
