"""Wire representations of repository records.

Field names follow the published request/response listings: camelCase for
entities and training requests, snake_case for classification requests.
Storage paths and task internals never appear here.
"""
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel

from doccategorizer.repository import (
    AttributeRecord,
    AttributeValueRecord,
    ClassificationSetRecord,
    ClassifierRecord,
    CollectionRecord,
    DocumentRecord,
    SchemaRecord,
    TrainerRecord,
)


class Dto(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)

    def dump(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True)


class RequestDto(Dto):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, extra="forbid")


# requests

class CollectionIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None


class DocumentIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None
    language: Optional[str] = None
    publication_date: Optional[str] = None
    abstract: Optional[str] = None


class ValueIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None


class AttributeIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None
    values: List[Union[str, ValueIn]] = Field(default_factory=list)


class SchemaIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None
    attributes: List[AttributeIn] = Field(min_length=1)


class ClassificationSetIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None
    collection_id: int
    schema_id: int


class LabelIn(RequestDto):
    document_id: int
    attribute_id: int
    value_ids: List[int] = Field(min_length=1)


class ClassifierIn(RequestDto):
    code: Optional[str] = None
    name: Optional[str] = None
    attribute_id: int


class TrainingIn(RequestDto):
    trainer_id: int
    classification_set_id: int
    settings: Optional[Dict[str, Any]] = None


class ClassificationRequestIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    classifier_id: int
    document_ids: List[int]


# responses

class CollectionOut(Dto):
    href: str
    id: int
    code: Optional[str]
    name: Optional[str]
    created: str
    documents: str


class DocumentOut(Dto):
    href: str
    id: int
    collection_id: int
    code: Optional[str]
    name: Optional[str]
    language: Optional[str]
    publication_date: Optional[str]
    abstract: Optional[str]
    created: str
    content: str


class ValueOut(Dto):
    id: int
    code: Optional[str]
    name: Optional[str]


class AttributeOut(Dto):
    id: int
    code: Optional[str]
    name: Optional[str]
    values: List[ValueOut]


class SchemaSummaryOut(Dto):
    href: str
    id: int
    code: Optional[str]
    name: Optional[str]
    created: str


class SchemaOut(SchemaSummaryOut):
    attributes: List[AttributeOut]


class ClassificationSetOut(Dto):
    href: str
    id: int
    code: Optional[str]
    name: Optional[str]
    collection_id: int
    schema_id: int
    created: str
    labels: str


class LabelOut(Dto):
    document_id: int
    attribute_id: int
    value_ids: List[int]


class TrainerOut(Dto):
    id: int
    code: Optional[str]
    name: Optional[str]


class ClassifierOut(Dto):
    href: str
    id: int
    code: Optional[str]
    name: Optional[str]
    attribute_id: int
    active_checkpoint_id: Optional[int]
    created: str
    trainings: str


def collection_href(collection_id: int) -> str:
    return f"/collections/{collection_id}/"


def document_href(collection_id: int, document_id: int) -> str:
    return f"/collections/{collection_id}/documents/{document_id}/"


def schema_href(schema_id: int) -> str:
    return f"/schemas/{schema_id}/"


def classification_set_href(set_id: int) -> str:
    return f"/classificationsets/{set_id}/"


def classifier_href(classifier_id: int) -> str:
    return f"/classifiers/{classifier_id}/"


def training_href(classifier_id: int, session_id: int) -> str:
    return f"/classifiers/{classifier_id}/trainings/{session_id}"


def collection_out(record: CollectionRecord) -> CollectionOut:
    href = collection_href(record.id)
    return CollectionOut(href=href, id=record.id, code=record.code, name=record.name, created=record.created,
                         documents=href + "documents/")


def document_out(record: DocumentRecord) -> DocumentOut:
    href = document_href(record.collection_id, record.id)
    return DocumentOut(href=href, id=record.id, collection_id=record.collection_id, code=record.code,
                       name=record.name, language=record.language, publication_date=record.publication_date,
                       abstract=record.abstract, created=record.created, content=href + "content")


def schema_summary_out(record: SchemaRecord) -> SchemaSummaryOut:
    return SchemaSummaryOut(href=schema_href(record.id), id=record.id, code=record.code, name=record.name,
                            created=record.created)


def schema_out(record: SchemaRecord, attributes: List[AttributeRecord],
               values: Dict[int, List[AttributeValueRecord]]) -> SchemaOut:
    return SchemaOut(
        href=schema_href(record.id), id=record.id, code=record.code, name=record.name, created=record.created,
        attributes=[
            AttributeOut(id=a.id, code=a.code, name=a.name,
                         values=[ValueOut(id=v.id, code=v.code, name=v.name) for v in values[a.id]])
            for a in attributes
        ],
    )


def classification_set_out(record: ClassificationSetRecord) -> ClassificationSetOut:
    href = classification_set_href(record.id)
    return ClassificationSetOut(href=href, id=record.id, code=record.code, name=record.name,
                                collection_id=record.collection_id, schema_id=record.schema_id,
                                created=record.created, labels=href + "labels/")


def trainer_out(record: TrainerRecord) -> TrainerOut:
    return TrainerOut(id=record.id, code=record.code, name=record.name)


def classifier_out(record: ClassifierRecord) -> ClassifierOut:
    href = classifier_href(record.id)
    return ClassifierOut(href=href, id=record.id, code=record.code, name=record.name,
                         attribute_id=record.attribute_id, active_checkpoint_id=record.active_checkpoint_id,
                         created=record.created, trainings=href + "trainings/")
