from .activations import ActivationKind, activate, sigmoid, softmax
from .gradcheck import gradient_check
from .layers import (
    Activation,
    Concat,
    Conv1D,
    Dense,
    Dropout,
    MaxOverTime,
    conv1d_forward,
    dense_forward,
    dropout_forward,
    max_over_time,
)
from .losses import LossKind, loss
from .network import INPUT, Network, backward
from .optimizers import Adam, AdamState, adam_step

__all__ = [
    "ActivationKind",
    "activate",
    "sigmoid",
    "softmax",
    "gradient_check",
    "Activation",
    "Concat",
    "Conv1D",
    "Dense",
    "Dropout",
    "MaxOverTime",
    "conv1d_forward",
    "dense_forward",
    "dropout_forward",
    "max_over_time",
    "LossKind",
    "loss",
    "INPUT",
    "Network",
    "backward",
    "Adam",
    "AdamState",
    "adam_step",
]
