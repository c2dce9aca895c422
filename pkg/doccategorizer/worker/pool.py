import threading
from typing import Callable, Dict, List, Optional, Tuple

from loguru import logger

from doccategorizer.errors import describe
from doccategorizer.preprocessing.embeddings import EmbeddingModel
from doccategorizer.repository import Repository
from doccategorizer.worker.queue import CLASSIFY_QUEUE, TRAINING_QUEUE, Task, TaskQueue
from doccategorizer.worker.runners import (
    ClassifierCache,
    classification_runner,
    submit_classification,
    submit_training,
    training_runner,
)


class WorkerPool:
    """In-process consumers of the persistent task queue.

    ``size`` threads serve the training queue and one thread serves the
    classification queue, so short classification requests never wait behind
    long trainings.
    """

    def __init__(self, repository: Repository, size: int = 2, embedding_model: Optional[EmbeddingModel] = None,
                 poll_interval: float = 0.1):
        if size < 1:
            raise ValueError(f"worker pool size must be at least 1, got {size}")
        self.repository = repository
        self.queue = TaskQueue(repository.db)
        self.size = size
        self.embedding_model = embedding_model
        self.poll_interval = poll_interval
        self.cache = ClassifierCache(embedding_model)
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []

    @property
    def running(self) -> bool:
        return any(t.is_alive() for t in self._threads)

    def start(self) -> "WorkerPool":
        if self.running:
            return self
        self._stop.clear()
        self.queue.recover_orphans()
        queues = [TRAINING_QUEUE] * self.size + [CLASSIFY_QUEUE]
        self._threads = [
            threading.Thread(target=self._loop, args=(name,), name=f"worker-{i}-{name}", daemon=True)
            for i, name in enumerate(queues)
        ]
        for thread in self._threads:
            thread.start()
        logger.info("worker pool started: training workers = {}", self.size)
        return self

    def stop(self, timeout: Optional[float] = None) -> None:
        """Ask workers to finish; a running training is interrupted after its current batch."""
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout)
        self._threads = []
        logger.info("worker pool stopped")

    def __enter__(self) -> "WorkerPool":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _loop(self, queue_name: str) -> None:
        while not self._stop.is_set():
            try:
                task = self.queue.claim(queue_name)
            except Exception:
                logger.exception("claiming from {} failed", queue_name)
                task = None
            if task is None:
                self._stop.wait(self.poll_interval)
                continue
            self.run_task(task)

    def run_task(self, task: Task) -> None:
        handlers: Dict[str, Callable[[Task], object]] = {
            "training": self._run_training,
            "classification": self._run_classification,
        }
        try:
            result = handlers[task.kind](task)
        except Exception as e:
            logger.exception("task {} failed", task.id)
            self.queue.fail(task.id, describe(e))
        else:
            self.queue.complete(task.id, result)

    def _run_training(self, task: Task):
        return training_runner(self.repository, self.queue, task.id, task.payload["session_id"],
                               embedding_model=self.embedding_model, should_stop=self._stop.is_set)

    def _run_classification(self, task: Task):
        return classification_runner(self.repository, task.payload["classifier_id"], task.payload["document_ids"],
                                     cache=self.cache)

    # client side

    def submit_training(self, classifier_id: int, classification_set_id: int, trainer,
                        settings: Optional[dict] = None) -> Tuple[int, str]:
        return submit_training(self.repository, self.queue, classifier_id, classification_set_id, trainer, settings)

    def submit_classification(self, classifier_id: int, document_ids: List[int]) -> str:
        return submit_classification(self.queue, classifier_id, document_ids)

    def query_task(self, task_id: str) -> dict:
        return query_task(self.repository, self.queue, task_id)


def query_task(repository: Repository, queue: TaskQueue, task_id: str) -> dict:
    """Live task state merged with the checkpoints its training session has recorded so far."""
    task = queue.get(task_id)
    snapshot = {
        "task_id": task.id,
        "state": task.state,
        "progress": task.progress,
        "created": task.created,
        "updated": task.updated,
    }
    if task.error:
        snapshot["error"] = task.error
    if task.kind == "training":
        session_id = task.payload["session_id"]
        snapshot["session_id"] = session_id
        snapshot["checkpoints"] = [
            {
                "id": c.id,
                "name": c.name,
                "created": c.created,
                "statistics": c.statistics,
                "score": c.score,
            }
            for c in repository.list_checkpoints(session_id)
        ]
    elif task.result is not None:
        snapshot["result"] = task.result
    return snapshot
