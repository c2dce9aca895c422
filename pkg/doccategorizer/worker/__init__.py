from .pool import WorkerPool, query_task
from .queue import (
    CLASSIFY_QUEUE,
    FAILURE,
    PENDING,
    PROGRESS,
    SUCCESS,
    TRAINING_QUEUE,
    Task,
    TaskQueue,
)
from .runners import (
    ClassifierCache,
    StoredDocument,
    classification_runner,
    submit_classification,
    submit_training,
    training_runner,
)

__all__ = [
    "WorkerPool",
    "query_task",
    "CLASSIFY_QUEUE",
    "FAILURE",
    "PENDING",
    "PROGRESS",
    "SUCCESS",
    "TRAINING_QUEUE",
    "Task",
    "TaskQueue",
    "ClassifierCache",
    "StoredDocument",
    "classification_runner",
    "submit_classification",
    "submit_training",
    "training_runner",
]
