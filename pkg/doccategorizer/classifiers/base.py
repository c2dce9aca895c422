import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from doccategorizer.classifiers.settings import MULTI_CLASS, TrainingSettings
from doccategorizer.errors import EmptyDatasetError, FormatVersionError, NotFoundError, ShapeError

FORMAT_NAME = "doccategorizer.classifier"
FORMAT_VERSION = 1
DESCRIPTOR_FILE = "classifier.json"

# (fraction of the whole run done, human readable action)
ProgressCallback = Callable[[float, str], None]


@dataclass
class Checkpoint:
    """Frozen trainer state at the end of an epoch plus its validation predictions."""

    epoch: int
    state: Any
    y_actual: np.ndarray
    statistics: Dict[str, float]
    settings: TrainingSettings
    created: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


CheckpointCallback = Callable[[Checkpoint], None]


def document_text(doc) -> str:
    """Documents are plain strings or objects with a read() method."""
    if isinstance(doc, str):
        return doc
    if hasattr(doc, "read"):
        if hasattr(doc, "seek"):
            doc.seek(0)
        return doc.read()
    raise TypeError(f"cannot read a document of type {type(doc).__name__}")


def as_indicators(y, mode: str = MULTI_CLASS, k: Optional[int] = None) -> np.ndarray:
    """Accept an N×K indicator matrix or a vector of class indices."""
    y = np.asarray(y)
    if y.ndim == 1:
        k = k or (int(y.max()) + 1 if y.size else 0)
        y = np.eye(k, dtype=np.int8)[y.astype(np.int64)]
    if y.ndim != 2:
        raise ShapeError(f"labels must be an N×K indicator matrix, got shape {y.shape}")
    if mode == MULTI_CLASS and y.shape[0] and not (np.count_nonzero(y, axis=1) == 1).all():
        raise ValueError("multi_class labels need exactly one class per document")
    return y


def check_labeled_set(x: Sequence, y: np.ndarray, name: str = "training") -> None:
    if len(x) == 0:
        raise EmptyDatasetError(f"the {name} set is empty")
    if y.shape[0] != len(x):
        raise ShapeError(f"{len(x)} {name} documents but {y.shape[0]} label rows")


class Classifier:
    type_name = ""

    def __init__(self, class_count: int, mode: str = MULTI_CLASS):
        self.class_count = class_count
        self.mode = mode

    def classify(self, docs: Sequence) -> np.ndarray:
        raise NotImplementedError

    def save(self, directory: str) -> None:
        raise NotImplementedError

    @classmethod
    def load(cls, directory: str, **kwargs) -> "Classifier":
        raise NotImplementedError

    def _descriptor(self, **extra) -> dict:
        return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "type": self.type_name,
                "mode": self.mode, "class_count": self.class_count, **extra}

    def _write_descriptor(self, directory: str, **extra) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, DESCRIPTOR_FILE), "w", encoding="utf-8") as f:
            json.dump(self._descriptor(**extra), f, indent=2)


def read_descriptor(directory: str) -> dict:
    path = os.path.join(directory, DESCRIPTOR_FILE)
    if not os.path.isfile(path):
        raise NotFoundError(f"no classifier stored in {directory}")
    with open(path, "r", encoding="utf-8") as f:
        descriptor = json.load(f)
    if descriptor.get("format") != FORMAT_NAME:
        raise FormatVersionError(f"{path} is not a classifier descriptor")
    if descriptor.get("version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"classifier format version {descriptor.get('version')} is not supported (expected {FORMAT_VERSION})")
    return descriptor


class Trainer:
    """Turns labelled documents into checkpoints; a checkpoint becomes a classifier."""

    type_name = ""

    def train(self, x: Sequence, y, x_validate: Sequence, y_validate,
              progress_callback: Optional[ProgressCallback] = None,
              checkpoint_callback: Optional[CheckpointCallback] = None,
              settings: Optional[TrainingSettings] = None,
              should_stop: Optional[Callable[[], bool]] = None) -> List[Checkpoint]:
        raise NotImplementedError

    def create_classifier(self, checkpoint: Checkpoint) -> Classifier:
        raise NotImplementedError
