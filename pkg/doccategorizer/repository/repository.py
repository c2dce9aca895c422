"""Relational persistence of every entity plus document and checkpoint file storage.

``code`` is an optional alternate key, unique within the entity's parent
scope: documents within their collection, attributes within their schema,
attribute values within their attribute, everything else globally. Deletes
cascade to owned rows and remove the files those rows own.
"""
import json
import math
import os
import shutil
from typing import Any, Dict, Iterable, List, Optional, Type

from loguru import logger

from doccategorizer.errors import DuplicateCodeError, IntegrityError, InvalidRequestError, NoContentError, NotFoundError
from doccategorizer.repository.db_manager import DBManager, is_unique_violation
from doccategorizer.repository.models import (
    AttributeRecord,
    AttributeValueRecord,
    CheckpointRecord,
    ClassificationSetRecord,
    ClassifierRecord,
    CollectionRecord,
    DocumentRecord,
    LabelRecord,
    Page,
    Record,
    SchemaRecord,
    TrainerRecord,
    TrainingSessionRecord,
    utc_now,
)

BUILTIN_TRAINERS = [
    ("cnn", "Convolutional neural network"),
    ("svm", "Linear support vector machine"),
]

MODELS: Dict[str, Type[Record]] = {
    "schemas": SchemaRecord,
    "attributes": AttributeRecord,
    "attribute_values": AttributeValueRecord,
    "collections": CollectionRecord,
    "documents": DocumentRecord,
    "classification_sets": ClassificationSetRecord,
    "labels": LabelRecord,
    "trainers": TrainerRecord,
    "classifiers": ClassifierRecord,
    "training_sessions": TrainingSessionRecord,
    "training_checkpoints": CheckpointRecord,
}

# column that scopes code uniqueness; None means unique across the table
CODE_SCOPE = {
    "schemas": None,
    "attributes": "schema_id",
    "attribute_values": "attribute_id",
    "collections": None,
    "documents": "collection_id",
    "classification_sets": None,
    "trainers": None,
    "classifiers": None,
}

ENTITY_NAMES = {
    "schemas": "schema",
    "attributes": "attribute",
    "attribute_values": "attribute value",
    "collections": "collection",
    "documents": "document",
    "classification_sets": "classification set",
    "labels": "label",
    "trainers": "trainer",
    "classifiers": "classifier",
    "training_sessions": "training session",
    "training_checkpoints": "checkpoint",
}


class Repository:
    def __init__(self, data_root: str, database: Optional[str] = None, echo: bool = False):
        self.data_root = os.path.abspath(data_root)
        os.makedirs(self.data_root, exist_ok=True)
        database = database or "sqlite:///" + os.path.join(self.data_root, "repo.db")
        self.db = DBManager(database, echo=echo)
        self._seed_trainers()

    def close(self) -> None:
        self.db.close()

    def __enter__(self) -> "Repository":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # generic table access

    def _insert(self, table: str, values: Dict[str, Any]) -> Record:
        values = {**values, "created": utc_now()}
        code = values.get("code")
        duplicate = DuplicateCodeError(f"{ENTITY_NAMES[table]} code {code!r} already exists")
        columns = ", ".join(f"`{c}`" for c in values)
        marks = ", ".join(["%s"] * len(values))
        # the check and the insert share one locked transaction
        with self.db.transaction():
            if code is not None and table in CODE_SCOPE:
                scope = CODE_SCOPE[table]
                where = {"code": code} if scope is None else {"code": code, scope: values[scope]}
                if self._count(table, where):
                    raise duplicate
            try:
                new_id = self.db.execute_query(f"INSERT INTO `{table}` ({columns}) VALUES ({marks})",
                                               list(values.values()))
            except Exception as e:
                if is_unique_violation(e):
                    raise duplicate from e
                raise
        logger.debug("created {} id = {}", ENTITY_NAMES[table], new_id)
        return MODELS[table](id=new_id, **values)

    def _get(self, table: str, record_id: int) -> Record:
        row = self.db.fetch_one(f"SELECT * FROM `{table}` WHERE `id` = %s", (record_id,))
        if row is None:
            raise NotFoundError(f"{ENTITY_NAMES[table]} {record_id} not found")
        return MODELS[table](**row)

    @staticmethod
    def _where(where: Dict[str, Any]):
        if not where:
            return "", []
        return " WHERE " + " AND ".join(f"`{c}` = %s" for c in where), list(where.values())

    def _count(self, table: str, where: Dict[str, Any]) -> int:
        clause, params = self._where(where)
        return int(self.db.fetch_one(f"SELECT COUNT(*) AS n FROM `{table}`{clause}", params)["n"])

    def _select(self, table: str, where: Dict[str, Any], offset: int = 0, limit: Optional[int] = None) -> List[Record]:
        clause, params = self._where(where)
        query = f"SELECT * FROM `{table}`{clause} ORDER BY `id`"
        if limit is not None:
            query += " LIMIT %s OFFSET %s"
            params += [int(limit), int(offset)]
        elif offset:
            query += " LIMIT %s OFFSET %s"
            params += [2 ** 62, int(offset)]
        return [MODELS[table](**row) for row in self.db.fetch_query(query, params)]

    def _page(self, table: str, where: Dict[str, Any], offset: int, limit: Optional[int], code: Optional[str]) -> Page:
        if offset < 0 or (limit is not None and limit < 0):
            raise ValueError("offset and limit must not be negative")
        if code is not None:
            where = {**where, "code": code}
        items = self._select(table, where, offset, limit)
        total = self._count(table, where)
        return Page(items=items, offset=offset, limit=limit if limit is not None else total, total=total)

    def _by_code(self, table: str, code: str, where: Optional[Dict[str, Any]] = None) -> Record:
        rows = self._select(table, {**(where or {}), "code": code})
        if not rows:
            raise NotFoundError(f"{ENTITY_NAMES[table]} with code {code!r} not found")
        return rows[0]

    def _delete_rows(self, table: str, where: Dict[str, Any]) -> None:
        clause, params = self._where(where)
        self.db.execute_query(f"DELETE FROM `{table}`{clause}", params)

    def _require(self, table: str, record_id: int) -> Record:
        try:
            return self._get(table, record_id)
        except NotFoundError:
            raise IntegrityError(f"{ENTITY_NAMES[table]} {record_id} does not exist") from None

    # storage paths

    def document_path(self, collection_id: int, document_id: int) -> str:
        return os.path.join(self.data_root, "documents", str(collection_id), f"{document_id}.txt")

    def checkpoint_dir(self, session_id: int, epoch: int) -> str:
        return os.path.join(self.data_root, "checkpoints", str(session_id), str(epoch))

    def session_dir(self, session_id: int) -> str:
        return os.path.join(self.data_root, "checkpoints", str(session_id))

    # collections and documents

    def create_collection(self, code: Optional[str] = None, name: Optional[str] = None) -> CollectionRecord:
        return self._insert("collections", {"code": code, "name": name})

    def get_collection(self, collection_id: int) -> CollectionRecord:
        return self._get("collections", collection_id)

    def get_collection_by_code(self, code: str) -> CollectionRecord:
        return self._by_code("collections", code)

    def list_collections(self, offset: int = 0, limit: Optional[int] = None, code: Optional[str] = None) -> Page:
        return self._page("collections", {}, offset, limit, code)

    def delete_collection(self, collection_id: int) -> None:
        self.get_collection(collection_id)
        with self.db.transaction():
            for cls_set in self._select("classification_sets", {"collection_id": collection_id}):
                self.delete_classification_set(cls_set.id)
            for document in self._select("documents", {"collection_id": collection_id}):
                self.delete_document(document.id)
            self._delete_rows("collections", {"id": collection_id})
        shutil.rmtree(os.path.join(self.data_root, "documents", str(collection_id)), ignore_errors=True)
        logger.info("collection deleted: id = {}", collection_id)

    def create_document(self, collection_id: int, code: Optional[str] = None, name: Optional[str] = None,
                        language: Optional[str] = None, publication_date: Optional[str] = None,
                        abstract: Optional[str] = None) -> DocumentRecord:
        self._require("collections", collection_id)
        return self._insert("documents", {"collection_id": collection_id, "code": code, "name": name,
                                          "language": language, "publication_date": publication_date,
                                          "abstract": abstract})

    def get_document(self, document_id: int, collection_id: Optional[int] = None) -> DocumentRecord:
        document = self._get("documents", document_id)
        if collection_id is not None and document.collection_id != collection_id:
            raise NotFoundError(f"document {document_id} not found in collection {collection_id}")
        return document

    def get_document_by_code(self, collection_id: int, code: str) -> DocumentRecord:
        return self._by_code("documents", code, {"collection_id": collection_id})

    def list_documents(self, collection_id: int, offset: int = 0, limit: Optional[int] = None,
                       code: Optional[str] = None) -> Page:
        self.get_collection(collection_id)
        return self._page("documents", {"collection_id": collection_id}, offset, limit, code)

    def delete_document(self, document_id: int) -> None:
        document = self.get_document(document_id)
        with self.db.transaction():
            self._delete_rows("labels", {"document_id": document_id})
            self._delete_rows("documents", {"id": document_id})
        if document.path and os.path.exists(document.path):
            os.remove(document.path)

    def store_document_content(self, document_id: int, text: str) -> str:
        document = self.get_document(document_id)
        path = self.document_path(document.collection_id, document_id)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
        self.db.execute_query("UPDATE `documents` SET `path` = %s WHERE `id` = %s", (path, document_id))
        return path

    def load_document_content(self, document_id: int) -> str:
        document = self.get_document(document_id)
        if not document.path or not os.path.exists(document.path):
            raise NoContentError(f"document {document_id} has no content")
        with open(document.path, "r", encoding="utf-8", newline="") as f:
            return f.read()

    def has_content(self, document_id: int) -> bool:
        document = self.get_document(document_id)
        return bool(document.path) and os.path.exists(document.path)

    # schemas, attributes and values

    def create_schema(self, code: Optional[str] = None, name: Optional[str] = None,
                      attributes: Iterable[dict] = ()) -> SchemaRecord:
        """Create a schema with nested attributes, each with nested ``values``, in one transaction.

        A value may be given as a plain code string or as ``{"code", "name"}``.
        """
        with self.db.transaction():
            schema = self._insert("schemas", {"code": code, "name": name})
            for attribute in attributes:
                created = self.create_attribute(schema.id, attribute.get("code"), attribute.get("name"))
                for value in attribute.get("values") or []:
                    if isinstance(value, str):
                        value = {"code": value, "name": value}
                    self.create_attribute_value(created.id, value.get("code"), value.get("name"))
        return schema

    def get_schema(self, schema_id: int) -> SchemaRecord:
        return self._get("schemas", schema_id)

    def get_schema_by_code(self, code: str) -> SchemaRecord:
        return self._by_code("schemas", code)

    def list_schemas(self, offset: int = 0, limit: Optional[int] = None, code: Optional[str] = None) -> Page:
        return self._page("schemas", {}, offset, limit, code)

    def delete_schema(self, schema_id: int) -> None:
        self.get_schema(schema_id)
        with self.db.transaction():
            for cls_set in self._select("classification_sets", {"schema_id": schema_id}):
                self.delete_classification_set(cls_set.id)
            for attribute in self.list_attributes(schema_id):
                for classifier in self._select("classifiers", {"attribute_id": attribute.id}):
                    self.delete_classifier(classifier.id)
                self._delete_rows("attribute_values", {"attribute_id": attribute.id})
            self._delete_rows("attributes", {"schema_id": schema_id})
            self._delete_rows("schemas", {"id": schema_id})
        logger.info("schema deleted: id = {}", schema_id)

    def create_attribute(self, schema_id: int, code: Optional[str] = None,
                         name: Optional[str] = None) -> AttributeRecord:
        self._require("schemas", schema_id)
        return self._insert("attributes", {"schema_id": schema_id, "code": code, "name": name})

    def get_attribute(self, attribute_id: int) -> AttributeRecord:
        return self._get("attributes", attribute_id)

    def list_attributes(self, schema_id: int) -> List[AttributeRecord]:
        return self._select("attributes", {"schema_id": schema_id})

    def create_attribute_value(self, attribute_id: int, code: Optional[str] = None,
                               name: Optional[str] = None) -> AttributeValueRecord:
        self._require("attributes", attribute_id)
        return self._insert("attribute_values", {"attribute_id": attribute_id, "code": code, "name": name})

    def get_attribute_value(self, value_id: int) -> AttributeValueRecord:
        return self._get("attribute_values", value_id)

    def list_attribute_values(self, attribute_id: int) -> List[AttributeValueRecord]:
        return self._select("attribute_values", {"attribute_id": attribute_id})

    # classification sets and labels

    def create_classification_set(self, collection_id: int, schema_id: int, code: Optional[str] = None,
                                  name: Optional[str] = None) -> ClassificationSetRecord:
        self._require("collections", collection_id)
        self._require("schemas", schema_id)
        return self._insert("classification_sets", {"collection_id": collection_id, "schema_id": schema_id,
                                                    "code": code, "name": name})

    def get_classification_set(self, set_id: int) -> ClassificationSetRecord:
        return self._get("classification_sets", set_id)

    def get_classification_set_by_code(self, code: str) -> ClassificationSetRecord:
        return self._by_code("classification_sets", code)

    def list_classification_sets(self, offset: int = 0, limit: Optional[int] = None,
                                 code: Optional[str] = None) -> Page:
        return self._page("classification_sets", {}, offset, limit, code)

    def delete_classification_set(self, set_id: int) -> None:
        self.get_classification_set(set_id)
        with self.db.transaction():
            for session in self._select("training_sessions", {"classification_set_id": set_id}):
                self.delete_training_session(session.id)
            self._delete_rows("labels", {"classification_set_id": set_id})
            self._delete_rows("classification_sets", {"id": set_id})

    def add_label(self, set_id: int, document_id: int, attribute_value_id: int) -> LabelRecord:
        """Label a document; the document must belong to the set's collection and the value to its schema."""
        cls_set = self.get_classification_set(set_id)
        document = self._require("documents", document_id)
        if document.collection_id != cls_set.collection_id:
            raise IntegrityError(f"document {document_id} is not part of collection {cls_set.collection_id}")
        value = self._require("attribute_values", attribute_value_id)
        attribute = self.get_attribute(value.attribute_id)
        if attribute.schema_id != cls_set.schema_id:
            raise IntegrityError(f"attribute value {attribute_value_id} does not belong to schema {cls_set.schema_id}")
        existing = self._select("labels", {"classification_set_id": set_id, "document_id": document_id,
                                           "attribute_value_id": attribute_value_id})
        if existing:
            return existing[0]
        return self._insert("labels", {"classification_set_id": set_id, "document_id": document_id,
                                       "attribute_value_id": attribute_value_id})

    def list_labels(self, set_id: int, document_id: Optional[int] = None) -> List[LabelRecord]:
        self.get_classification_set(set_id)
        where = {"classification_set_id": set_id}
        if document_id is not None:
            where["document_id"] = document_id
        return self._select("labels", where)

    def delete_labels(self, set_id: int, document_id: int) -> None:
        self.get_classification_set(set_id)
        self._delete_rows("labels", {"classification_set_id": set_id, "document_id": document_id})

    # trainers

    def _seed_trainers(self) -> None:
        with self.db.transaction():
            for key, name in BUILTIN_TRAINERS:
                if not self._count("trainers", {"type": key}):
                    self._insert("trainers", {"code": key, "name": name, "type": key})

    def list_trainers(self) -> List[TrainerRecord]:
        return self._select("trainers", {})

    def get_trainer(self, trainer_id: int) -> TrainerRecord:
        return self._get("trainers", trainer_id)

    def get_trainer_by_code(self, code: str) -> TrainerRecord:
        return self._by_code("trainers", code)

    # classifiers, training sessions and checkpoints

    def create_classifier(self, attribute_id: int, code: Optional[str] = None,
                          name: Optional[str] = None) -> ClassifierRecord:
        self._require("attributes", attribute_id)
        return self._insert("classifiers", {"attribute_id": attribute_id, "code": code, "name": name})

    def get_classifier(self, classifier_id: int) -> ClassifierRecord:
        return self._get("classifiers", classifier_id)

    def get_classifier_by_code(self, code: str) -> ClassifierRecord:
        return self._by_code("classifiers", code)

    def list_classifiers(self, offset: int = 0, limit: Optional[int] = None, code: Optional[str] = None) -> Page:
        return self._page("classifiers", {}, offset, limit, code)

    def delete_classifier(self, classifier_id: int) -> None:
        self.get_classifier(classifier_id)
        with self.db.transaction():
            self.db.execute_query("UPDATE `classifiers` SET `active_checkpoint_id` = NULL WHERE `id` = %s",
                                  (classifier_id,))
            for session in self._select("training_sessions", {"classifier_id": classifier_id}):
                self.delete_training_session(session.id)
            self._delete_rows("classifiers", {"id": classifier_id})
        logger.info("classifier deleted: id = {}", classifier_id)

    def set_active_checkpoint(self, classifier_id: int, checkpoint_id: Optional[int]) -> ClassifierRecord:
        self.get_classifier(classifier_id)
        if checkpoint_id is not None:
            checkpoint = self.get_checkpoint(checkpoint_id)
            session = self.get_training_session(checkpoint.training_session_id)
            if session.classifier_id != classifier_id:
                raise IntegrityError(f"checkpoint {checkpoint_id} was not produced for classifier {classifier_id}")
        self.db.execute_query("UPDATE `classifiers` SET `active_checkpoint_id` = %s WHERE `id` = %s",
                              (checkpoint_id, classifier_id))
        return self.get_classifier(classifier_id)

    def create_training_session(self, classifier_id: int, classification_set_id: int, trainer_id: int,
                                settings: Optional[dict] = None,
                                task_id: Optional[str] = None) -> TrainingSessionRecord:
        self._require("classifiers", classifier_id)
        self._require("classification_sets", classification_set_id)
        self._require("trainers", trainer_id)
        record = self._insert("training_sessions", {
            "classifier_id": classifier_id,
            "classification_set_id": classification_set_id,
            "trainer_id": trainer_id,
            "settings": json.dumps(settings) if settings is not None else None,
            "task_id": task_id,
        })
        return self.get_training_session(record.id)

    def get_training_session(self, session_id: int) -> TrainingSessionRecord:
        return self._get("training_sessions", session_id)

    def list_training_sessions(self, classifier_id: int) -> List[TrainingSessionRecord]:
        return self._select("training_sessions", {"classifier_id": classifier_id})

    def set_session_task(self, session_id: int, task_id: str) -> None:
        self.db.execute_query("UPDATE `training_sessions` SET `task_id` = %s WHERE `id` = %s", (task_id, session_id))

    def delete_training_session(self, session_id: int) -> None:
        session = self.get_training_session(session_id)
        with self.db.transaction():
            checkpoint_ids = [c.id for c in self.list_checkpoints(session_id)]
            for checkpoint_id in checkpoint_ids:
                self.db.execute_query("UPDATE `classifiers` SET `active_checkpoint_id` = NULL "
                                      "WHERE `active_checkpoint_id` = %s", (checkpoint_id,))
            self._delete_rows("training_checkpoints", {"training_session_id": session_id})
            self._delete_rows("training_sessions", {"id": session_id})
        shutil.rmtree(self.session_dir(session.id), ignore_errors=True)

    def record_checkpoint(self, session_id: int, epoch: int, score: float, statistics: Dict[str, float],
                          artifact_dir: Optional[str] = None, name: Optional[str] = None) -> int:
        self._require("training_sessions", session_id)
        if score is None or not math.isfinite(score):
            raise InvalidRequestError(f"checkpoint score must be a finite number, got {score}")
        record = self._insert("training_checkpoints", {
            "training_session_id": session_id,
            "epoch": epoch,
            "name": name or f"Checkpoint {epoch}",
            "score": float(score),
            "statistics": json.dumps(statistics),
            "path": artifact_dir,
        })
        logger.info("checkpoint recorded: session = {}, epoch = {}, score = {:.4f}", session_id, epoch, score)
        return record.id

    def get_checkpoint(self, checkpoint_id: int) -> CheckpointRecord:
        return self._get("training_checkpoints", checkpoint_id)

    def list_checkpoints(self, session_id: int) -> List[CheckpointRecord]:
        return self._select("training_checkpoints", {"training_session_id": session_id})

    def best_checkpoint(self, session_id: int) -> Optional[CheckpointRecord]:
        """Highest score; the earliest checkpoint wins ties."""
        checkpoints = self.list_checkpoints(session_id)
        if not checkpoints:
            return None
        return max(checkpoints, key=lambda c: (c.score, -c.id))
