from .db_manager import DBManager, parse_database_url
from .models import (
    AttributeRecord,
    AttributeValueRecord,
    CheckpointRecord,
    ClassificationSetRecord,
    ClassifierRecord,
    CollectionRecord,
    DocumentRecord,
    LabelRecord,
    Page,
    SchemaRecord,
    TrainerRecord,
    TrainingSessionRecord,
    utc_now,
)
from .repository import Repository

__all__ = [
    "DBManager",
    "parse_database_url",
    "AttributeRecord",
    "AttributeValueRecord",
    "CheckpointRecord",
    "ClassificationSetRecord",
    "ClassifierRecord",
    "CollectionRecord",
    "DocumentRecord",
    "LabelRecord",
    "Page",
    "SchemaRecord",
    "TrainerRecord",
    "TrainingSessionRecord",
    "utc_now",
    "Repository",
]
