"""Persistent task queue stored in the ``tasks`` table.

A task moves PENDING -> PROGRESS -> SUCCESS | FAILURE and never backwards.
Claiming is a conditional update, so a task is handed to exactly one worker
even when several pools share a database.
"""
import json
import time
from typing import Any, Dict, Optional
from uuid import uuid4

from loguru import logger
from pydantic import BaseModel, field_validator

from doccategorizer.errors import NotFoundError
from doccategorizer.repository.db_manager import DBManager
from doccategorizer.repository.models import utc_now

PENDING = "PENDING"
PROGRESS = "PROGRESS"
SUCCESS = "SUCCESS"
FAILURE = "FAILURE"
TERMINAL_STATES = (SUCCESS, FAILURE)

TRAINING_QUEUE = "training_queue"
CLASSIFY_QUEUE = "classify_queue"


class Task(BaseModel):
    id: str
    kind: str
    queue: str
    state: str
    payload: Dict[str, Any] = {}
    progress: Dict[str, Any] = {}
    result: Optional[Any] = None
    error: Optional[str] = None
    created: str
    updated: str

    @field_validator("payload", "progress", mode="before")
    @classmethod
    def _decode_object(cls, value):
        return json.loads(value) if isinstance(value, str) else (value or {})

    @field_validator("result", mode="before")
    @classmethod
    def _decode_result(cls, value):
        return json.loads(value) if isinstance(value, str) else value

    @property
    def finished(self) -> bool:
        return self.state in TERMINAL_STATES


def progress_payload(fraction: float, message: str) -> Dict[str, Any]:
    return {"current_action": {"message": message, "progress": fraction}}


class TaskQueue:
    def __init__(self, db: DBManager):
        self.db = db

    def enqueue(self, kind: str, queue: str, payload: Dict[str, Any]) -> str:
        task_id = uuid4().hex
        now = utc_now()
        self.db.execute_query(
            "INSERT INTO `tasks` (`id`, `kind`, `queue`, `state`, `payload`, `progress`, `created`, `updated`) "
            "VALUES (%s, %s, %s, %s, %s, %s, %s, %s)",
            (task_id, kind, queue, PENDING, json.dumps(payload), json.dumps(progress_payload(0.0, "queued")), now, now))
        logger.info("task queued: id = {}, kind = {}, queue = {}", task_id, kind, queue)
        return task_id

    def get(self, task_id: str) -> Task:
        row = self.db.fetch_one("SELECT * FROM `tasks` WHERE `id` = %s", (task_id,))
        if row is None:
            raise NotFoundError(f"task {task_id} not found")
        return Task(**row)

    def claim(self, queue: str) -> Optional[Task]:
        """Move the oldest PENDING task of ``queue`` to PROGRESS and return it."""
        with self.db.transaction():
            row = self.db.fetch_one(
                "SELECT `id` FROM `tasks` WHERE `queue` = %s AND `state` = %s ORDER BY `created`, `id` LIMIT 1",
                (queue, PENDING))
            if row is None:
                return None
            claimed = self.db.execute_update(
                "UPDATE `tasks` SET `state` = %s, `updated` = %s WHERE `id` = %s AND `state` = %s",
                (PROGRESS, utc_now(), row["id"], PENDING))
        if claimed != 1:
            return None
        logger.info("task claimed: id = {}, queue = {}", row["id"], queue)
        return self.get(row["id"])

    def update_progress(self, task_id: str, fraction: float, message: str) -> None:
        """Record progress; a fraction lower than the stored one is ignored."""
        with self.db.transaction():
            task = self.get(task_id)
            if task.state != PROGRESS:
                return
            current = task.progress.get("current_action", {}).get("progress", 0.0)
            fraction = max(float(current), min(1.0, float(fraction)))
            self.db.execute_query("UPDATE `tasks` SET `progress` = %s, `updated` = %s WHERE `id` = %s",
                                  (json.dumps(progress_payload(fraction, message)), utc_now(), task_id))

    def _finish(self, task_id: str, state: str, result: Any = None, error: Optional[str] = None,
                progress: Optional[Dict[str, Any]] = None) -> None:
        assignments = "`state` = %s, `result` = %s, `error` = %s, `updated` = %s"
        params = [state, json.dumps(result), error, utc_now()]
        if progress is not None:
            assignments += ", `progress` = %s"
            params.append(json.dumps(progress))
        changed = self.db.execute_update(
            f"UPDATE `tasks` SET {assignments} WHERE `id` = %s AND `state` IN (%s, %s)",
            params + [task_id, PENDING, PROGRESS])
        if changed:
            logger.info("task finished: id = {}, state = {}", task_id, state)

    def complete(self, task_id: str, result: Any = None) -> None:
        self._finish(task_id, SUCCESS, result=result, progress=progress_payload(1.0, "done"))

    def fail(self, task_id: str, error: str) -> None:
        self._finish(task_id, FAILURE, error=error)

    def recover_orphans(self) -> int:
        """Fail tasks left in PROGRESS by a pool that is gone."""
        count = self.db.execute_update(
            "UPDATE `tasks` SET `state` = %s, `error` = %s, `updated` = %s WHERE `state` = %s",
            (FAILURE, "worker terminated", utc_now(), PROGRESS))
        if count:
            logger.warning("marked {} orphaned tasks as failed", count)
        return count

    def wait(self, task_id: str, timeout: Optional[float] = None, interval: float = 0.05) -> Task:
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            task = self.get(task_id)
            if task.finished:
                return task
            if deadline is not None and time.monotonic() >= deadline:
                raise TimeoutError(f"task {task_id} did not finish within {timeout} seconds")
            time.sleep(interval)
