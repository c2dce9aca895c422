import copy
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
from loguru import logger

from doccategorizer.engine.activations import ActivationKind
from doccategorizer.engine.layers import LAYER_TYPES, Activation, Dropout, Layer
from doccategorizer.engine.losses import LossKind, loss, loss_backward
from doccategorizer.errors import FormatVersionError, NotFoundError, ShapeError

INPUT = "input"
FORMAT_NAME = "doccategorizer.network"
FORMAT_VERSION = 1
DESCRIPTOR_FILE = "network.json"
PARAMS_FILE = "params.npz"


@dataclass
class Node:
    name: str
    layer: Layer
    inputs: List[str]
    shape: tuple = field(default=())


class Network:
    """A directed acyclic graph of layers with one input and one output.

    Nodes are kept in insertion order, which is a topological order because
    a node may only consume nodes that were added before it.
    """

    def __init__(self, input_shape: Sequence[int], dtype=np.float32, seed: int = 0):
        self.input_shape = tuple(int(d) for d in input_shape)
        if not self.input_shape or min(self.input_shape) < 1:
            raise ShapeError(f"input shape must have positive extents, got {self.input_shape}")
        self.dtype = np.dtype(dtype)
        self.seed = seed
        self.nodes: Dict[str, Node] = {}
        self.output: str = INPUT
        self.mode = "eval"
        self.rng = np.random.default_rng(seed)
        self._built = False

    # construction

    def add(self, layer: Layer, inputs=None, name: Optional[str] = None) -> str:
        if self._built:
            raise RuntimeError("cannot add layers to a built network")
        if inputs is None:
            inputs = [self.output]
        elif isinstance(inputs, str):
            inputs = [inputs]
        name = name or f"{layer.type_name}_{len(self.nodes)}"
        if name in self.nodes or name == INPUT or "." in name:
            raise ValueError(f"invalid or duplicate node name {name!r}")
        shapes = []
        for source in inputs:
            if source == INPUT:
                shapes.append(self.input_shape)
            elif source in self.nodes:
                shapes.append(self.nodes[source].shape)
            else:
                raise ShapeError(f"node {name!r} consumes unknown node {source!r}")
        node = Node(name=name, layer=layer, inputs=list(inputs), shape=layer.output_shape(shapes))
        self.nodes[name] = node
        self.output = name
        return name

    def build(self) -> "Network":
        init_rng = np.random.default_rng(self.seed)
        for node in self.nodes.values():
            node.layer.build(self._input_shapes(node), init_rng, self.dtype)
        self.rng = np.random.default_rng(self.seed + 1)
        self._built = True
        logger.debug("network built: nodes = {}, parameters = {}", len(self.nodes), self.count_params())
        return self

    def _input_shapes(self, node: Node):
        return [self.input_shape if s == INPUT else self.nodes[s].shape for s in node.inputs]

    @property
    def output_shape(self) -> tuple:
        return self.nodes[self.output].shape if self.nodes else self.input_shape

    @property
    def output_activation(self) -> Optional[ActivationKind]:
        layer = self.nodes[self.output].layer if self.nodes else None
        return layer.kind if isinstance(layer, Activation) else None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {f"{node.name}.{key}": value
                for node in self.nodes.values()
                for key, value in node.layer.params.items()}

    def count_params(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    # modes

    def train(self) -> "Network":
        self.mode = "train"
        return self

    def eval(self) -> "Network":
        self.mode = "eval"
        return self

    @contextmanager
    def freeze_dropout(self) -> Iterator["Network"]:
        """Reuse one dropout mask per layer for every pass inside the block."""
        layers = [n.layer for n in self.nodes.values() if isinstance(n.layer, Dropout)]
        for layer in layers:
            layer.frozen, layer.mask = True, None
        try:
            yield self
        finally:
            for layer in layers:
                layer.frozen, layer.mask = False, None

    # passes

    def _cast(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"network expects samples of shape {self.input_shape}, got {x.shape[1:]}")
        return x

    def _forward(self, x: np.ndarray, training: bool, keep_caches: bool):
        values = {INPUT: x}
        caches = {}
        for node in self.nodes.values():
            out, cache = node.layer.forward([values[s] for s in node.inputs], training, self.rng)
            values[node.name] = out
            if keep_caches:
                caches[node.name] = cache
        return values, caches

    def forward(self, x) -> np.ndarray:
        values, _ = self._forward(self._cast(x), self.mode == "train", keep_caches=False)
        return values[self.output]

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        """Eval-mode forward pass in chunks; does not mutate the network."""
        x = self._cast(x)
        outputs = []
        for start in range(0, x.shape[0], batch_size):
            values, _ = self._forward(x[start:start + batch_size], False, keep_caches=False)
            outputs.append(values[self.output])
        if not outputs:
            return np.zeros((0,) + self.output_shape, dtype=self.dtype)
        return np.concatenate(outputs, axis=0)

    def check_loss(self, kind) -> LossKind:
        kind = LossKind(kind)
        activation = self.output_activation
        if kind is LossKind.CATEGORICAL_CROSS_ENTROPY and activation is not ActivationKind.SOFTMAX:
            raise ShapeError("categorical cross-entropy requires a softmax output")
        if kind is LossKind.BINARY_CROSS_ENTROPY and activation is not ActivationKind.SIGMOID:
            raise ShapeError("binary cross-entropy requires a sigmoid output")
        return kind

    def _fused(self, kind: LossKind) -> bool:
        return kind in (LossKind.CATEGORICAL_CROSS_ENTROPY, LossKind.BINARY_CROSS_ENTROPY)

    def loss(self, x, y, kind) -> float:
        kind = self.check_loss(kind)
        return loss(kind, y, self.forward(x))

    def backward(self, x, y, kind):
        """Return (loss, gradients) with gradients keyed like parameters()."""
        kind = self.check_loss(kind)
        x = self._cast(x)
        y = np.asarray(y, dtype=self.dtype)
        values, caches = self._forward(x, self.mode == "train", keep_caches=True)
        a = values[self.output]
        if y.shape != a.shape:
            raise ShapeError(f"targets {y.shape} do not match outputs {a.shape}")
        value = loss(kind, y, a)

        upstream: Dict[str, np.ndarray] = {}
        grads: Dict[str, np.ndarray] = {}
        nodes = list(self.nodes.values())
        output_node = self.nodes[self.output]
        if self._fused(kind):
            # softmax/sigmoid + matching cross-entropy: dE/dz = (a - y) / N
            delta = ((a - y) / x.shape[0]).astype(self.dtype)
            self._accumulate(upstream, output_node.inputs[0], delta)
        else:
            upstream[output_node.name] = loss_backward(kind, y, a).astype(self.dtype)

        for node in reversed(nodes):
            if node.name not in upstream:
                continue
            dinputs, local = node.layer.backward(upstream.pop(node.name), caches[node.name])
            for key, g in local.items():
                grads[f"{node.name}.{key}"] = g
            for source, g in zip(node.inputs, dinputs):
                if source != INPUT:
                    self._accumulate(upstream, source, g)
        params = self.parameters()
        for key, p in params.items():
            if key not in grads:
                grads[key] = np.zeros_like(p)
        return value, grads

    @staticmethod
    def _accumulate(upstream, name, g):
        upstream[name] = upstream[name] + g if name in upstream else g

    def train_on_batch(self, x, y, kind, optimizer) -> float:
        self.train()
        value, grads = self.backward(x, y, kind)
        optimizer.step(self.parameters(), grads)
        return value

    # copies and persistence

    def astype(self, dtype) -> "Network":
        other = copy.deepcopy(self)
        other.dtype = np.dtype(dtype)
        for node in other.nodes.values():
            for key, value in node.layer.params.items():
                node.layer.params[key] = value.astype(other.dtype)
            mask = getattr(node.layer, "mask", None)
            if mask is not None:
                node.layer.mask = mask.astype(other.dtype)
        return other

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def descriptor(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "dtype": self.dtype.name,
            "seed": self.seed,
            "input_shape": list(self.input_shape),
            "output": self.output,
            "nodes": [
                {"name": n.name, "type": n.layer.type_name, "inputs": n.inputs, "config": n.layer.config()}
                for n in self.nodes.values()
            ],
        }

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, DESCRIPTOR_FILE), "w", encoding="utf-8") as f:
            json.dump(self.descriptor(), f, indent=2)
        np.savez(os.path.join(directory, PARAMS_FILE), **self.parameters())

    @classmethod
    def load(cls, directory: str) -> "Network":
        descriptor_path = os.path.join(directory, DESCRIPTOR_FILE)
        params_path = os.path.join(directory, PARAMS_FILE)
        if not os.path.isfile(descriptor_path) or not os.path.isfile(params_path):
            raise NotFoundError(f"no network stored in {directory}")
        with open(descriptor_path, "r", encoding="utf-8") as f:
            descriptor = json.load(f)
        if descriptor.get("format") != FORMAT_NAME:
            raise FormatVersionError(f"{descriptor_path} is not a network descriptor")
        if descriptor.get("version") != FORMAT_VERSION:
            raise FormatVersionError(
                f"network format version {descriptor.get('version')} is not supported (expected {FORMAT_VERSION})")
        net = cls(descriptor["input_shape"], dtype=descriptor["dtype"], seed=descriptor.get("seed", 0))
        for entry in descriptor["nodes"]:
            layer_type = LAYER_TYPES.get(entry["type"])
            if layer_type is None:
                raise FormatVersionError(f"{descriptor_path}: unknown layer type {entry['type']!r}")
            layer = layer_type.from_config(entry["config"])
            net.add(layer, inputs=entry["inputs"], name=entry["name"])
        net.output = descriptor["output"]
        with np.load(params_path) as stored:
            for node in net.nodes.values():
                for key in _param_names(node.layer):
                    node.layer.params[key] = stored[f"{node.name}.{key}"].astype(net.dtype)
        net._built = True
        return net.eval()


def _param_names(layer: Layer):
    return ("W", "b") if layer.type_name in ("dense", "conv1d") else ()


def backward(net: Network, x, y, kind) -> Dict[str, np.ndarray]:
    _, grads = net.backward(x, y, kind)
    return grads
