from typing import Dict, Optional, Type

import numpy as np

from doccategorizer.classifiers.base import Classifier, Trainer, read_descriptor
from doccategorizer.classifiers.cnn import CnnClassifier, CnnTrainer
from doccategorizer.classifiers.svm import SvmClassifier, SvmTrainer
from doccategorizer.errors import FormatVersionError, NotFoundError
from doccategorizer.preprocessing.embeddings import EmbeddingModel

TRAINERS: Dict[str, Type[Trainer]] = {
    CnnTrainer.type_name: CnnTrainer,
    SvmTrainer.type_name: SvmTrainer,
}
TRAINER_NAMES = {
    CnnTrainer.type_name: "Convolutional neural network",
    SvmTrainer.type_name: "Linear support vector machine",
}
CLASSIFIERS: Dict[str, Type[Classifier]] = {
    CnnClassifier.type_name: CnnClassifier,
    SvmClassifier.type_name: SvmClassifier,
}


def get_trainer(key: str, embedding_model: Optional[EmbeddingModel] = None,
                statistics_path: Optional[str] = None) -> Trainer:
    if key not in TRAINERS:
        raise NotFoundError(f"unknown trainer {key!r}, expected one of {sorted(TRAINERS)}")
    if key == CnnTrainer.type_name:
        return CnnTrainer(embedding_model=embedding_model, statistics_path=statistics_path)
    return TRAINERS[key](statistics_path=statistics_path)


def save_classifier(classifier: Classifier, directory: str) -> None:
    classifier.save(directory)


def load_classifier(directory: str, embedding_model: Optional[EmbeddingModel] = None) -> Classifier:
    descriptor = read_descriptor(directory)
    kind = descriptor.get("type")
    if kind not in CLASSIFIERS:
        raise FormatVersionError(f"{directory} holds an unknown classifier type {kind!r}")
    return CLASSIFIERS[kind].load(directory, embedding_model=embedding_model)


def classify(classifier: Classifier, docs) -> np.ndarray:
    return classifier.classify(docs)
