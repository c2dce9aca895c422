"""Linear SVM baseline on tf-idf vectors of complete documents.

One-vs-rest hinge loss with L2 regularization: one ``SGDClassifier`` per
category, each advanced by one ``partial_fit`` pass per epoch so progress is
reported between passes and the step counter carries over. The learned
coefficients are stacked into a single weight matrix for classification and
persistence.
"""
import os
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from sklearn.linear_model import SGDClassifier

from doccategorizer.classifiers.base import (
    Checkpoint,
    Classifier,
    Trainer,
    as_indicators,
    check_labeled_set,
    document_text,
    read_descriptor,
)
from doccategorizer.classifiers.settings import MULTI_CLASS, TrainingSettings
from doccategorizer.classifiers.statistics import StatisticsLog
from doccategorizer.engine.activations import sigmoid, softmax
from doccategorizer.errors import (
    EmptyDatasetError,
    FormatVersionError,
    SettingsError,
    ShapeError,
    TrainingInterrupted,
)
from doccategorizer.evaluation.metrics import score_predictions
from doccategorizer.preprocessing.tfidf import TfIdfModel, tfidf_fit
from doccategorizer.preprocessing.tokenizers import get_tokenizer

TFIDF_FILE = "tfidf.json"
WEIGHTS_FILE = "weights.npz"

SIGNS = np.array([-1, 1])

@dataclass
class SvmState:
    tfidf: TfIdfModel
    weights: np.ndarray
    intercepts: np.ndarray


def hinge_objective(margins: np.ndarray, signs: np.ndarray, weights: np.ndarray, lam: float) -> float:
    """Mean summed one-vs-rest hinge loss plus lambda/2 * ||W||^2."""
    hinge = np.maximum(0.0, 1.0 - signs * margins).sum(axis=1).mean() if margins.shape[0] else 0.0
    return float(hinge + 0.5 * lam * np.sum(weights * weights))


def margins_to_probabilities(margins: np.ndarray, mode: str) -> np.ndarray:
    return softmax(margins) if mode == MULTI_CLASS else sigmoid(margins)


class SvmClassifier(Classifier):
    type_name = "svm"

    def __init__(self, tfidf: TfIdfModel, weights: np.ndarray, intercepts: np.ndarray, tokenizer: str = "word",
                 mode: str = MULTI_CLASS):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (intercepts.shape[0], len(tfidf)):
            raise ShapeError(f"weights {weights.shape} do not match {intercepts.shape[0]} classes "
                             f"over {len(tfidf)} terms")
        super().__init__(weights.shape[0], mode)
        self.tfidf = tfidf
        self.weights = weights
        self.intercepts = np.asarray(intercepts, dtype=np.float64)
        self.tokenizer_name = tokenizer
        self.tokenizer = get_tokenizer(tokenizer)

    def margins(self, docs: Sequence) -> np.ndarray:
        features = self.tfidf.transform_many([self.tokenizer.tokenize(document_text(d)) for d in docs])
        return np.asarray(features @ self.weights.T) + self.intercepts

    def classify(self, docs: Sequence) -> np.ndarray:
        return margins_to_probabilities(self.margins(docs), self.mode)

    def save(self, directory: str) -> None:
        self._write_descriptor(directory, tokenizer=self.tokenizer_name, tfidf=TFIDF_FILE, weights=WEIGHTS_FILE)
        self.tfidf.save(os.path.join(directory, TFIDF_FILE))
        np.savez(os.path.join(directory, WEIGHTS_FILE), weights=self.weights, intercepts=self.intercepts)

    @classmethod
    def load(cls, directory: str, **kwargs) -> "SvmClassifier":
        descriptor = read_descriptor(directory)
        if descriptor["type"] != cls.type_name:
            raise FormatVersionError(f"{directory} holds a {descriptor['type']!r} classifier, not an svm")
        tfidf = TfIdfModel.load(os.path.join(directory, descriptor["tfidf"]))
        with np.load(os.path.join(directory, descriptor["weights"])) as stored:
            weights, intercepts = stored["weights"], stored["intercepts"]
        return cls(tfidf, weights, intercepts, descriptor["tokenizer"], descriptor["mode"])


class SvmTrainer(Trainer):
    type_name = "svm"

    def __init__(self, statistics_path: Optional[str] = None, **kwargs):
        self.statistics_path = statistics_path

    def train(self, x, y, x_validate, y_validate, progress_callback=None, checkpoint_callback=None,
              settings: Optional[TrainingSettings] = None, should_stop=None) -> List[Checkpoint]:
        settings = settings or TrainingSettings()
        started = time.perf_counter()
        y = as_indicators(y, settings.mode)
        y_validate = as_indicators(y_validate, settings.mode, k=y.shape[1])
        check_labeled_set(x, y)
        check_labeled_set(x_validate, y_validate, "validation")
        if y.shape[1] < 2:
            raise SettingsError(f"a classifier needs at least 2 classes, got {y.shape[1]}")
        tokenizer = get_tokenizer(settings.tokenizer)
        tokens = [tokenizer.tokenize(document_text(doc)) for doc in x]
        tfidf = tfidf_fit(tokens)
        features = tfidf.transform_many(tokens)
        signs = np.where(y > 0, 1, -1)
        lam = settings.svm_lambda
        k, n, d = y.shape[1], features.shape[0], features.shape[1]
        if d == 0:
            raise EmptyDatasetError("training documents contain no terms")
        logger.info("svm training: documents = {}, terms = {}, classes = {}", n, d, k)

        # one generator shared by all categories keeps the shuffles seeded but distinct
        random_state = np.random.RandomState(settings.seed)
        estimators = [SGDClassifier(loss="hinge", penalty="l2", alpha=lam, random_state=random_state)
                      for _ in range(k)]
        for epoch in range(settings.svm_epochs):
            for c, estimator in enumerate(estimators):
                estimator.partial_fit(features, signs[:, c], classes=SIGNS)
            if progress_callback is not None:
                progress_callback((epoch + 1) / settings.svm_epochs, f"pass {epoch + 1}/{settings.svm_epochs}")
            if should_stop is not None and should_stop():
                raise TrainingInterrupted(f"training stopped during pass {epoch}")
        weights = np.vstack([estimator.coef_ for estimator in estimators])
        intercepts = np.concatenate([estimator.intercept_ for estimator in estimators])

        state = SvmState(tfidf=tfidf, weights=weights, intercepts=intercepts)
        classifier = SvmClassifier(tfidf, weights, intercepts, settings.tokenizer, settings.mode)
        margins = classifier.margins(x_validate)
        y_actual = margins_to_probabilities(margins, settings.mode)
        report = score_predictions(y_validate, y_actual, settings.mode)
        train_margins = np.asarray(features @ weights.T) + intercepts
        statistics = {
            "loss": hinge_objective(train_margins, signs, weights, lam),
            "val_loss": hinge_objective(margins, np.where(y_validate > 0, 1.0, -1.0), weights, lam),
            "f1_macro": report.macro_f1,
            "f1_micro": report.micro_f1,
            "accuracy": report.accuracy,
            "seconds": time.perf_counter() - started,
        }
        epoch = settings.svm_epochs - 1
        logger.info("svm trained: loss = {:.4f}, val_loss = {:.4f}, f1_macro = {:.4f}", statistics["loss"],
                    statistics["val_loss"], statistics["f1_macro"])
        checkpoint = Checkpoint(epoch=epoch, state=state, y_actual=y_actual, statistics=statistics, settings=settings)
        if self.statistics_path:
            StatisticsLog(self.statistics_path).append(epoch, statistics)
        if checkpoint_callback is not None:
            checkpoint_callback(checkpoint)
        return [checkpoint]

    def create_classifier(self, checkpoint: Checkpoint) -> SvmClassifier:
        state: SvmState = checkpoint.state
        return SvmClassifier(state.tfidf, state.weights, state.intercepts, checkpoint.settings.tokenizer,
                             checkpoint.settings.mode)
