from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from doccategorizer.engine.activations import ActivationKind
from doccategorizer.errors import SettingsError

MULTI_CLASS = "multi_class"
MULTI_LABEL = "multi_label"


class TrainingSettings(BaseModel):
    """Parameters of one training run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # path of a text embedding file; trainers fall back to the model they were given
    embeddings: Optional[str] = None
    embeddings_format: Literal["word2vec_text", "glove_text"] = "glove_text"
    tokenizer: str = "word"
    max_timesteps: int = 1000
    batch_size: int = 200
    filter_count: int = 200
    filter_lens: Tuple[int, ...] = (1, 2, 3)
    dense_size: int = 100
    dense_size2: Optional[int] = None
    activation: str = "leaky_relu"
    leaky_slope: float = 0.3
    dropout_rate: float = 0.3
    epochs: int = 50
    mode: Literal["multi_class", "multi_label"] = MULTI_CLASS
    seed: int = 0
    learning_rate: float = 0.001
    precision: Literal["float32", "float64"] = "float32"
    cache_dir: Optional[str] = None
    prefetch: bool = True
    svm_lambda: float = 1e-4
    svm_epochs: int = 20

    @field_validator("activation")
    @classmethod
    def _known_activation(cls, value: str) -> str:
        kind = ActivationKind.parse(value)
        if kind is ActivationKind.SOFTMAX:
            raise ValueError("softmax is reserved for the output layer")
        return kind.value

    @model_validator(mode="after")
    def _consistent(self) -> "TrainingSettings":
        if not self.filter_lens or min(self.filter_lens) < 1:
            raise ValueError("filter_lens must be a non-empty list of positive lengths")
        if self.max_timesteps < max(self.filter_lens):
            raise ValueError(f"max_timesteps {self.max_timesteps} is shorter than the longest filter")
        for name in ("batch_size", "epochs", "filter_count", "dense_size", "svm_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.dense_size2 is not None and self.dense_size2 < 1:
            raise ValueError("dense_size2 must be at least 1 when set")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.leaky_slope <= 0 or self.learning_rate <= 0 or self.svm_lambda <= 0:
            raise ValueError("leaky_slope, learning_rate and svm_lambda must be positive")
        return self

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.precision)

    @classmethod
    def from_dict(cls, values: Optional[dict] = None, **overrides) -> "TrainingSettings":
        try:
            return cls(**{**(values or {}), **overrides})
        except (ValidationError, TypeError) as e:
            raise SettingsError(f"invalid training settings: {e}") from e
