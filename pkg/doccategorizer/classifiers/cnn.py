import os
import time
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from doccategorizer.classifiers.base import (
    Checkpoint,
    Classifier,
    Trainer,
    as_indicators,
    check_labeled_set,
    document_text,
    read_descriptor,
)
from doccategorizer.classifiers.batches import BatchGenerator
from doccategorizer.classifiers.settings import MULTI_CLASS, TrainingSettings
from doccategorizer.classifiers.statistics import StatisticsLog
from doccategorizer.engine import Activation, Adam, Concat, Conv1D, Dense, Dropout, LossKind, MaxOverTime, Network, loss
from doccategorizer.errors import FormatVersionError, SettingsError, ShapeError, TrainingInterrupted
from doccategorizer.evaluation.metrics import score_predictions
from doccategorizer.preprocessing.embeddings import EmbeddingModel, EmbeddingTransformation, load_embeddings
from doccategorizer.preprocessing.tokenizers import get_tokenizer

NETWORK_DIR = "network"
EMBEDDINGS_FILE = "embeddings.txt"


def cnn_build(settings: TrainingSettings, k: int, dim: int) -> Network:
    """Convolutional text classifier over fixed word vectors.

    input -> dropout -> one conv/activation/max-over-time branch per filter
    length -> concat -> dropout -> dense -> activation [-> dense -> activation]
    -> dropout -> dense(k) -> softmax or sigmoid
    """
    if k < 2:
        raise SettingsError(f"a classifier needs at least 2 classes, got {k}")
    rate = settings.dropout_rate
    net = Network((settings.max_timesteps, dim), dtype=settings.dtype, seed=settings.seed)
    net.add(Dropout(rate), name="input_dropout")
    branches = []
    for i, f in enumerate(settings.filter_lens):
        net.add(Conv1D(settings.filter_count, f), inputs="input_dropout", name=f"conv{i}_{f}")
        net.add(Activation(settings.activation, settings.leaky_slope), name=f"conv{i}_{f}_activation")
        branches.append(net.add(MaxOverTime(), name=f"pool{i}_{f}"))
    net.add(Concat(), inputs=branches, name="concat")
    net.add(Dropout(rate), name="concat_dropout")
    net.add(Dense(settings.dense_size), name="hidden")
    net.add(Activation(settings.activation, settings.leaky_slope), name="hidden_activation")
    if settings.dense_size2:
        net.add(Dense(settings.dense_size2), name="hidden2")
        net.add(Activation(settings.activation, settings.leaky_slope), name="hidden2_activation")
    net.add(Dropout(rate), name="hidden_dropout")
    net.add(Dense(k), name="output")
    net.add(Activation("softmax" if settings.mode == MULTI_CLASS else "sigmoid"), name="output_activation")
    return net.build()


def loss_kind(mode: str) -> LossKind:
    return LossKind.CATEGORICAL_CROSS_ENTROPY if mode == MULTI_CLASS else LossKind.BINARY_CROSS_ENTROPY


def predict_tokens(network: Network, transformation: EmbeddingTransformation, token_lists: List[List[str]],
                   batch_size: int = 200) -> np.ndarray:
    """Eval-mode probabilities, embedding one chunk of documents at a time."""
    outputs = [network.predict(transformation.transform(token_lists[i:i + batch_size]), batch_size)
               for i in range(0, len(token_lists), batch_size)]
    if not outputs:
        return np.zeros((0,) + network.output_shape, dtype=network.dtype)
    return np.concatenate(outputs, axis=0)


class CnnClassifier(Classifier):
    type_name = "cnn"

    def __init__(self, network: Network, embedding_model: EmbeddingModel, tokenizer: str = "word",
                 max_timesteps: Optional[int] = None, mode: str = MULTI_CLASS, batch_size: int = 200):
        super().__init__(network.output_shape[0], mode)
        max_timesteps = max_timesteps or network.input_shape[0]
        if network.input_shape != (max_timesteps, embedding_model.dim):
            raise ShapeError(f"network expects {network.input_shape} inputs, embeddings give "
                             f"({max_timesteps}, {embedding_model.dim})")
        self.network = network.eval()
        self.embedding_model = embedding_model
        self.tokenizer_name = tokenizer
        self.tokenizer = get_tokenizer(tokenizer)
        self.max_timesteps = max_timesteps
        self.batch_size = batch_size
        self.transformation = EmbeddingTransformation(embedding_model, max_timesteps, network.dtype)

    def classify(self, docs: Sequence) -> np.ndarray:
        tokens = [self.tokenizer.tokenize(document_text(doc)) for doc in docs]
        return predict_tokens(self.network, self.transformation, tokens, self.batch_size)

    def save(self, directory: str) -> None:
        model = self.embedding_model
        if model.source:
            reference = {"path": model.source, "format": model.source_format}
        else:
            os.makedirs(directory, exist_ok=True)
            model.save(os.path.join(directory, EMBEDDINGS_FILE), "glove_text")
            reference = {"file": EMBEDDINGS_FILE, "format": "glove_text"}
        self._write_descriptor(directory, tokenizer=self.tokenizer_name, max_timesteps=self.max_timesteps,
                               embeddings=reference, network=NETWORK_DIR)
        self.network.save(os.path.join(directory, NETWORK_DIR))

    @classmethod
    def load(cls, directory: str, embedding_model: Optional[EmbeddingModel] = None, **kwargs) -> "CnnClassifier":
        descriptor = read_descriptor(directory)
        if descriptor["type"] != cls.type_name:
            raise FormatVersionError(f"{directory} holds a {descriptor['type']!r} classifier, not a cnn")
        network = Network.load(os.path.join(directory, descriptor["network"]))
        if embedding_model is None:
            reference = descriptor["embeddings"]
            path = os.path.join(directory, reference["file"]) if "file" in reference else reference["path"]
            embedding_model = load_embeddings(path, reference["format"])
        return cls(network, embedding_model, descriptor["tokenizer"], descriptor["max_timesteps"], descriptor["mode"])


class CnnTrainer(Trainer):
    type_name = "cnn"

    def __init__(self, embedding_model: Optional[EmbeddingModel] = None, statistics_path: Optional[str] = None):
        self.embedding_model = embedding_model
        self.statistics_path = statistics_path

    def _embeddings(self, settings: TrainingSettings) -> EmbeddingModel:
        if self.embedding_model is None:
            if not settings.embeddings:
                raise SettingsError("the cnn trainer needs an embedding model or an embeddings path")
            self.embedding_model = load_embeddings(settings.embeddings, settings.embeddings_format)
        return self.embedding_model

    def train(self, x, y, x_validate, y_validate, progress_callback=None, checkpoint_callback=None,
              settings: Optional[TrainingSettings] = None, should_stop=None) -> List[Checkpoint]:
        settings = settings or TrainingSettings()
        y = as_indicators(y, settings.mode)
        y_validate = as_indicators(y_validate, settings.mode, k=y.shape[1])
        check_labeled_set(x, y)
        check_labeled_set(x_validate, y_validate, "validation")
        if y_validate.shape[1] != y.shape[1]:
            raise ShapeError(f"training has {y.shape[1]} classes, validation {y_validate.shape[1]}")
        model = self._embeddings(settings)
        tokenizer = get_tokenizer(settings.tokenizer)
        kind = loss_kind(settings.mode)
        net = cnn_build(settings, y.shape[1], model.dim)
        optimizer = Adam(alpha=settings.learning_rate)
        generator = BatchGenerator(x, y, model, tokenizer, settings.max_timesteps, settings.batch_size,
                                   seed=settings.seed, cache_dir=settings.cache_dir, prefetch=settings.prefetch,
                                   dtype=settings.dtype)
        transformation = EmbeddingTransformation(model, settings.max_timesteps, settings.dtype)
        val_tokens = [tokenizer.tokenize(document_text(doc)) for doc in x_validate]
        y_val = y_validate.astype(np.float64)
        stats_log = StatisticsLog(self.statistics_path) if self.statistics_path else None
        total_steps = settings.epochs * len(generator)
        logger.info("cnn training: documents = {}, validation = {}, classes = {}, parameters = {}",
                    len(x), len(x_validate), y.shape[1], net.count_params())

        checkpoints: List[Checkpoint] = []
        for epoch in range(settings.epochs):
            started = time.perf_counter()
            loss_sum = 0.0
            for b, (x_batch, y_batch) in enumerate(generator.epoch(epoch)):
                loss_sum += net.train_on_batch(x_batch, y_batch, kind, optimizer) * x_batch.shape[0]
                if progress_callback is not None:
                    progress_callback((epoch * len(generator) + b + 1) / total_steps,
                                      f"epoch {epoch + 1}/{settings.epochs}, batch {b + 1}/{len(generator)}")
                if should_stop is not None and should_stop():
                    raise TrainingInterrupted(f"training stopped during epoch {epoch}")
            net.eval()
            y_actual = predict_tokens(net, transformation, val_tokens, settings.batch_size)
            report = score_predictions(y_validate, y_actual, settings.mode)
            statistics = {
                "loss": loss_sum / len(x),
                "val_loss": loss(kind, y_val, y_actual),
                "f1_macro": report.macro_f1,
                "f1_micro": report.micro_f1,
                "accuracy": report.accuracy,
                "seconds": time.perf_counter() - started,
            }
            logger.info("epoch {}: loss = {:.4f}, val_loss = {:.4f}, f1_macro = {:.4f}, f1_micro = {:.4f}, "
                        "seconds = {:.1f}", epoch, statistics["loss"], statistics["val_loss"],
                        statistics["f1_macro"], statistics["f1_micro"], statistics["seconds"])
            checkpoint = Checkpoint(epoch=epoch, state=net.copy(), y_actual=y_actual, statistics=statistics,
                                    settings=settings)
            checkpoints.append(checkpoint)
            if stats_log is not None:
                stats_log.append(epoch, statistics)
            if checkpoint_callback is not None:
                checkpoint_callback(checkpoint)
        return checkpoints

    def create_classifier(self, checkpoint: Checkpoint) -> CnnClassifier:
        settings = checkpoint.settings
        return CnnClassifier(checkpoint.state, self._embeddings(settings), settings.tokenizer,
                             settings.max_timesteps, settings.mode, settings.batch_size)
