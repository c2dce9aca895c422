import json
import os
import shutil
import threading
from collections import OrderedDict
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from doccategorizer.classifiers import Classifier, TrainingSettings, get_trainer, load_classifier
from doccategorizer.classifiers.base import DESCRIPTOR_FILE
from doccategorizer.errors import (
    EmptyDatasetError,
    IntegrityError,
    InvalidRequestError,
    NotFoundError,
    NotTrainedError,
    SettingsError,
)
from doccategorizer.evaluation.metrics import binarize, indicator_labels, score_predictions
from doccategorizer.evaluation.validation import split_validation
from doccategorizer.preprocessing.embeddings import EmbeddingModel
from doccategorizer.repository import Repository
from doccategorizer.worker.queue import CLASSIFY_QUEUE, TRAINING_QUEUE, TaskQueue

CLASSES_FILE = "classes.json"
STATISTICS_FILE = "statistics.csv"


class StoredDocument:
    """Document whose text is read from the repository only when needed."""

    def __init__(self, repository: Repository, document_id: int):
        self.repository = repository
        self.id = document_id

    def read(self) -> str:
        return self.repository.load_document_content(self.id)


def submit_training(repository: Repository, queue: TaskQueue, classifier_id: int, classification_set_id: int,
                    trainer: Union[str, int], settings: Optional[dict] = None) -> Tuple[int, str]:
    """Validate a training request, persist its session and queue it; returns (session id, task id).

    ``trainer`` is a trainer code or a trainer id.
    """
    classifier = repository.get_classifier(classifier_id)
    cls_set = repository.get_classification_set(classification_set_id)
    if isinstance(trainer, int) or str(trainer).isdigit():
        trainer_record = repository.get_trainer(int(trainer))
    else:
        trainer_record = repository.get_trainer_by_code(trainer)
    attribute = repository.get_attribute(classifier.attribute_id)
    if attribute.schema_id != cls_set.schema_id:
        raise IntegrityError(f"attribute {attribute.id} of classifier {classifier_id} is not part of schema "
                             f"{cls_set.schema_id} of classification set {classification_set_id}")
    TrainingSettings.from_dict(settings or {})
    with repository.db.transaction():
        session = repository.create_training_session(classifier_id, classification_set_id, trainer_record.id,
                                                     settings=settings or {})
        task_id = queue.enqueue("training", TRAINING_QUEUE, {"session_id": session.id})
        repository.set_session_task(session.id, task_id)
    logger.info("training submitted: classifier = {}, session = {}, task = {}", classifier_id, session.id, task_id)
    return session.id, task_id


def submit_classification(queue: TaskQueue, classifier_id: int, document_ids: List[int]) -> str:
    return queue.enqueue("classification", CLASSIFY_QUEUE,
                         {"classifier_id": classifier_id, "document_ids": list(document_ids)})


def _labeled_set(repository: Repository, set_id: int, value_ids: List[int], mode: str):
    index = {value_id: i for i, value_id in enumerate(value_ids)}
    by_document: Dict[int, List[int]] = {}
    for label in repository.list_labels(set_id):
        if label.attribute_value_id in index:
            by_document.setdefault(label.document_id, []).append(index[label.attribute_value_id])
    if not by_document:
        raise EmptyDatasetError("no labeled documents")
    document_ids = sorted(by_document)
    y = np.zeros((len(document_ids), len(value_ids)), dtype=np.int8)
    for row, document_id in enumerate(document_ids):
        classes = by_document[document_id]
        if mode == "multi_class" and len(classes) != 1:
            raise IntegrityError(f"document {document_id} has {len(classes)} labels; multi_class training "
                                 "needs exactly one")
        y[row, classes] = 1
    return document_ids, y


def training_runner(repository: Repository, queue: TaskQueue, task_id: str, session_id: int,
                    embedding_model: Optional[EmbeddingModel] = None,
                    should_stop: Optional[Callable[[], bool]] = None) -> dict:
    """Train one session, recording a scored checkpoint per epoch, then activate the best one."""
    session = repository.get_training_session(session_id)
    classifier = repository.get_classifier(session.classifier_id)
    trainer_record = repository.get_trainer(session.trainer_id)
    settings = TrainingSettings.from_dict(session.settings or {})
    # class order is ascending attribute value id, fixed here and stored with every checkpoint
    value_ids = [v.id for v in repository.list_attribute_values(classifier.attribute_id)]
    if len(value_ids) < 2:
        raise SettingsError(f"attribute {classifier.attribute_id} needs at least two values to train on")
    document_ids, y = _labeled_set(repository, session.classification_set_id, value_ids, settings.mode)
    documents = [StoredDocument(repository, d) for d in document_ids]
    for document_id in document_ids:
        if not repository.has_content(document_id):
            raise InvalidRequestError(f"document {document_id} has no content")
    train_idx, val_idx = split_validation(y, seed=settings.seed)
    x_train, x_val = [documents[i] for i in train_idx], [documents[i] for i in val_idx]
    y_train, y_val = y[train_idx], y[val_idx]

    cache_dir = settings.cache_dir or os.path.join(repository.data_root, "cache", str(session_id))
    settings = settings.model_copy(update={"cache_dir": cache_dir})
    trainer = get_trainer(trainer_record.type, embedding_model=embedding_model,
                          statistics_path=os.path.join(repository.session_dir(session_id), STATISTICS_FILE))
    recorded: List[int] = []

    def on_progress(fraction: float, message: str) -> None:
        queue.update_progress(task_id, fraction, message)

    def on_checkpoint(checkpoint) -> None:
        score = score_predictions(y_val, checkpoint.y_actual, settings.mode).macro_f1
        directory = repository.checkpoint_dir(session_id, checkpoint.epoch)
        trainer.create_classifier(checkpoint).save(directory)
        with open(os.path.join(directory, CLASSES_FILE), "w", encoding="utf-8") as f:
            json.dump({"attribute_id": classifier.attribute_id, "value_ids": value_ids}, f)
        statistics = {k: float(v) for k, v in checkpoint.statistics.items()}
        recorded.append(repository.record_checkpoint(session_id, checkpoint.epoch, score, statistics, directory))

    logger.info("training started: session = {}, trainer = {}, documents = {}, validation = {}",
                session_id, trainer_record.type, len(x_train), len(x_val))
    try:
        trainer.train(x_train, y_train, x_val, y_val, on_progress, on_checkpoint, settings=settings,
                      should_stop=should_stop)
    finally:
        shutil.rmtree(cache_dir, ignore_errors=True)
    best = repository.best_checkpoint(session_id)
    repository.set_active_checkpoint(classifier.id, best.id)
    logger.info("training finished: session = {}, checkpoints = {}, active = {} (score {:.4f})",
                session_id, len(recorded), best.id, best.score)
    return {"session_id": session_id, "checkpoints": recorded, "active_checkpoint_id": best.id}


class ClassifierCache:
    """Loaded classifiers, one entry per classifier id.

    An entry is replaced as soon as its classifier's active checkpoint
    changes, and the least recently used classifier is dropped once more than
    ``max_entries`` are held.
    """

    def __init__(self, embedding_model: Optional[EmbeddingModel] = None, max_entries: int = 4):
        if max_entries < 1:
            raise ValueError(f"max_entries must be at least 1, got {max_entries}")
        self.embedding_model = embedding_model
        self.max_entries = max_entries
        self._items: "OrderedDict[int, Tuple[int, Classifier, List[int]]]" = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._items)

    def checkpoints(self) -> Dict[int, int]:
        """Cached checkpoint id per classifier id."""
        with self._lock:
            return {classifier_id: entry[0] for classifier_id, entry in self._items.items()}

    def get(self, classifier_id: int, checkpoint_id: int, directory: str) -> Tuple[Classifier, List[int]]:
        with self._lock:
            entry = self._items.get(classifier_id)
            if entry is None or entry[0] != checkpoint_id:
                if entry is not None:
                    logger.debug("classifier {}: checkpoint {} replaces {}", classifier_id, checkpoint_id, entry[0])
                with open(os.path.join(directory, CLASSES_FILE), "r", encoding="utf-8") as f:
                    value_ids = json.load(f)["value_ids"]
                entry = (checkpoint_id, load_classifier(directory, self._embeddings_for(directory)), value_ids)
                self._items[classifier_id] = entry
            self._items.move_to_end(classifier_id)
            while len(self._items) > self.max_entries:
                dropped, _ = self._items.popitem(last=False)
                logger.debug("classifier {} dropped from cache", dropped)
            return entry[1], entry[2]

    def evict(self, classifier_id: int) -> None:
        with self._lock:
            self._items.pop(classifier_id, None)

    def _embeddings_for(self, directory: str) -> Optional[EmbeddingModel]:
        # a shared model is only reused when the checkpoint was trained on that very file
        model = self.embedding_model
        if model is None or not model.source:
            return None
        with open(os.path.join(directory, DESCRIPTOR_FILE), "r", encoding="utf-8") as f:
            reference = json.load(f).get("embeddings") or {}
        return model if reference.get("path") == model.source else None


def classification_runner(repository: Repository, classifier_id: int, document_ids: List[int],
                          cache: Optional[ClassifierCache] = None) -> Dict[str, dict]:
    """Map every document id to the attribute value ids its active checkpoint assigns."""
    cache = cache or ClassifierCache()
    record = repository.get_classifier(classifier_id)
    if record.active_checkpoint_id is None:
        raise NotTrainedError(f"classifier {classifier_id} is not trained")
    checkpoint = repository.get_checkpoint(record.active_checkpoint_id)
    classifier, value_ids = cache.get(record.id, checkpoint.id, checkpoint.path)
    texts = []
    for document_id in document_ids:
        try:
            texts.append(repository.load_document_content(document_id))
        except NotFoundError as e:
            raise InvalidRequestError(f"document {document_id}: {e}") from e
    if not texts:
        return {}
    probabilities = classifier.classify(texts)
    labels = indicator_labels(binarize(probabilities, classifier.mode))
    return {
        str(document_id): {"labels": [value_ids[i] for i in row], "probabilities": probs.tolist()}
        for document_id, row, probs in zip(document_ids, labels, probabilities)
    }
