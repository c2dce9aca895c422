import json
from datetime import datetime, timezone
from typing import Any, Dict, Generic, List, Optional, TypeVar

from pydantic import BaseModel, field_validator

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S.%f"


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime(TIMESTAMP_FORMAT)


class Record(BaseModel):
    id: int
    created: str


class CodedRecord(Record):
    code: Optional[str] = None
    name: Optional[str] = None


class SchemaRecord(CodedRecord):
    pass


class AttributeRecord(CodedRecord):
    schema_id: int


class AttributeValueRecord(CodedRecord):
    attribute_id: int


class CollectionRecord(CodedRecord):
    pass


class DocumentRecord(CodedRecord):
    collection_id: int
    path: Optional[str] = None
    language: Optional[str] = None
    publication_date: Optional[str] = None
    abstract: Optional[str] = None


class ClassificationSetRecord(CodedRecord):
    collection_id: int
    schema_id: int


class LabelRecord(Record):
    classification_set_id: int
    document_id: int
    attribute_value_id: int


class TrainerRecord(CodedRecord):
    type: str


class ClassifierRecord(CodedRecord):
    attribute_id: int
    active_checkpoint_id: Optional[int] = None


def _json_field(value):
    if value is None or isinstance(value, dict):
        return value
    return json.loads(value)


class TrainingSessionRecord(Record):
    classifier_id: int
    classification_set_id: int
    trainer_id: int
    settings: Optional[Dict[str, Any]] = None
    task_id: Optional[str] = None

    @field_validator("settings", mode="before")
    @classmethod
    def _parse_settings(cls, value):
        return _json_field(value)


class CheckpointRecord(Record):
    training_session_id: int
    epoch: int
    name: Optional[str] = None
    score: float
    statistics: Dict[str, float] = {}
    path: Optional[str] = None

    @field_validator("statistics", mode="before")
    @classmethod
    def _parse_statistics(cls, value):
        return _json_field(value) or {}


T = TypeVar("T")


class Page(BaseModel, Generic[T]):
    items: List[T]
    offset: int
    limit: int
    total: int
