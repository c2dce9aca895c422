"""REST endpoints over the repository and the worker pool.

Handlers never wait for a training; only classification requests await their
task, bounded by CLASSIFY_TIMEOUT. Repository calls and content file I/O run
on the default executor so the event loop keeps serving other requests.
"""
import asyncio
import functools
import json
import time
from typing import Callable, Dict, List, Optional, Type, TypeVar

from aiohttp import web
from loguru import logger
from pydantic import BaseModel, TypeAdapter, ValidationError

from doccategorizer.errors import InvalidRequestError, NotFoundError, NotTrainedError
from doccategorizer.repository import LabelRecord, Page, Repository
from doccategorizer.service.dtos import (
    ClassificationRequestIn,
    ClassificationSetIn,
    ClassifierIn,
    CollectionIn,
    DocumentIn,
    LabelIn,
    LabelOut,
    SchemaIn,
    TrainingIn,
    classification_set_href,
    classification_set_out,
    classifier_out,
    collection_out,
    document_out,
    schema_out,
    schema_summary_out,
    trainer_out,
    training_href,
)
from doccategorizer.service.middlewares import CONFIG, STATUS_BY_NAME, json_error
from doccategorizer.worker import FAILURE, WorkerPool

REPOSITORY = web.AppKey("repository", Repository)
POOL = web.AppKey("pool", WorkerPool)

DEFAULT_LIMIT = 100
MAX_LIMIT = 1000
POLL_INTERVAL = 0.05

M = TypeVar("M", bound=BaseModel)
T = TypeVar("T")

routes = web.RouteTableDef()


# request helpers

def _repo(request: web.Request) -> Repository:
    return request.app[REPOSITORY]


async def _blocking(fn: Callable[..., T], *args, **kwargs) -> T:
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(None, functools.partial(fn, *args, **kwargs))


def _int_query(request: web.Request, key: str, default: int) -> int:
    raw = request.query.get(key)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise InvalidRequestError(f"query parameter {key} must be an integer, got {raw!r}") from None
    if value < 0:
        raise InvalidRequestError(f"query parameter {key} must not be negative")
    return value


def _paging(request: web.Request):
    offset = _int_query(request, "offset", 0)
    limit = min(_int_query(request, "limit", DEFAULT_LIMIT), MAX_LIMIT)
    return offset, limit, request.query.get("code")


def _page_response(request: web.Request, page: Page, items: List[dict]) -> web.Response:
    return web.json_response({
        "href": request.path_qs,
        "offset": page.offset,
        "limit": page.limit,
        "total": page.total,
        "items": items,
    })


async def _json_body(request: web.Request):
    try:
        return await request.json()
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InvalidRequestError(f"request body is not valid JSON: {e}") from None


def _validate(model: Type[M], body) -> M:
    try:
        return model.model_validate(body)
    except ValidationError as e:
        raise InvalidRequestError(str(e)) from None


def _validate_list(model: Type[M], body) -> List[M]:
    try:
        return TypeAdapter(List[model]).validate_python(body)
    except ValidationError as e:
        raise InvalidRequestError(str(e)) from None


def _created(dto) -> web.Response:
    return web.json_response(dto.dump(), status=201, headers={"Location": dto.href})


def _path_id(request: web.Request, key: str) -> int:
    return int(request.match_info[key])


# root

@routes.get("/")
async def index(request: web.Request) -> web.Response:
    return web.json_response({
        "collections": "/collections/",
        "schemas": "/schemas/",
        "classificationsets": "/classificationsets/",
        "trainers": "/trainers/",
        "classifiers": "/classifiers/",
        "classification_requests": "/classification_requests/",
    })


# collections and documents

@routes.get("/collections/")
async def list_collections(request: web.Request) -> web.Response:
    offset, limit, code = _paging(request)
    page = await _blocking(_repo(request).list_collections, offset, limit, code)
    return _page_response(request, page, [collection_out(c).dump() for c in page.items])


@routes.post("/collections/")
async def create_collection(request: web.Request) -> web.Response:
    body = _validate(CollectionIn, await _json_body(request))
    return _created(collection_out(await _blocking(_repo(request).create_collection, body.code, body.name)))


@routes.get(r"/collections/{cid:\d+}/")
async def get_collection(request: web.Request) -> web.Response:
    collection = await _blocking(_repo(request).get_collection, _path_id(request, "cid"))
    return web.json_response(collection_out(collection).dump())


@routes.delete(r"/collections/{cid:\d+}/")
async def delete_collection(request: web.Request) -> web.Response:
    await _blocking(_repo(request).delete_collection, _path_id(request, "cid"))
    return web.Response(status=204)


@routes.get(r"/collections/{cid:\d+}/documents/")
async def list_documents(request: web.Request) -> web.Response:
    offset, limit, code = _paging(request)
    page = await _blocking(_repo(request).list_documents, _path_id(request, "cid"), offset, limit, code)
    return _page_response(request, page, [document_out(d).dump() for d in page.items])


@routes.post(r"/collections/{cid:\d+}/documents/")
async def create_document(request: web.Request) -> web.Response:
    repo = _repo(request)
    collection = await _blocking(repo.get_collection, _path_id(request, "cid"))
    body = _validate(DocumentIn, await _json_body(request))
    document = await _blocking(repo.create_document, collection.id, body.code, body.name, body.language,
                               body.publication_date, body.abstract)
    return _created(document_out(document))


async def _document(request: web.Request):
    return await _blocking(_repo(request).get_document, _path_id(request, "docid"), _path_id(request, "cid"))


@routes.get(r"/collections/{cid:\d+}/documents/{docid:\d+}/")
async def get_document(request: web.Request) -> web.Response:
    return web.json_response(document_out(await _document(request)).dump())


@routes.delete(r"/collections/{cid:\d+}/documents/{docid:\d+}/")
async def delete_document(request: web.Request) -> web.Response:
    document = await _document(request)
    await _blocking(_repo(request).delete_document, document.id)
    return web.Response(status=204)


@routes.get(r"/collections/{cid:\d+}/documents/{docid:\d+}/content")
async def get_content(request: web.Request) -> web.Response:
    document = await _document(request)
    text = await _blocking(_repo(request).load_document_content, document.id)
    return web.Response(text=text, content_type="text/plain", charset="utf-8")


async def _store_content(request: web.Request, status: int) -> web.Response:
    document = await _document(request)
    try:
        text = await request.text()
    except UnicodeDecodeError as e:
        raise InvalidRequestError(f"document content is not valid text: {e}") from None
    await _blocking(_repo(request).store_document_content, document.id, text)
    logger.debug("document content stored: id = {}, characters = {}", document.id, len(text))
    if status == 204:
        return web.Response(status=204)
    href = document_out(document).content
    return web.json_response({"href": href, "characters": len(text)}, status=status, headers={"Location": href})


@routes.post(r"/collections/{cid:\d+}/documents/{docid:\d+}/content")
async def post_content(request: web.Request) -> web.Response:
    return await _store_content(request, 201)


@routes.put(r"/collections/{cid:\d+}/documents/{docid:\d+}/content")
async def put_content(request: web.Request) -> web.Response:
    return await _store_content(request, 204)


# schemas

def _schema_detail(repo: Repository, schema_id: int):
    schema = repo.get_schema(schema_id)
    attributes = repo.list_attributes(schema_id)
    values = {a.id: repo.list_attribute_values(a.id) for a in attributes}
    return schema_out(schema, attributes, values)


@routes.get("/schemas/")
async def list_schemas(request: web.Request) -> web.Response:
    offset, limit, code = _paging(request)
    page = await _blocking(_repo(request).list_schemas, offset, limit, code)
    return _page_response(request, page, [schema_summary_out(s).dump() for s in page.items])


@routes.post("/schemas/")
async def create_schema(request: web.Request) -> web.Response:
    body = _validate(SchemaIn, await _json_body(request))
    attributes = [
        {"code": a.code, "name": a.name,
         "values": [v if isinstance(v, str) else v.model_dump() for v in a.values]}
        for a in body.attributes
    ]
    repo = _repo(request)

    def create():
        schema = repo.create_schema(body.code, body.name, attributes)
        return _schema_detail(repo, schema.id)

    return _created(await _blocking(create))


@routes.get(r"/schemas/{sid:\d+}/")
async def get_schema(request: web.Request) -> web.Response:
    detail = await _blocking(_schema_detail, _repo(request), _path_id(request, "sid"))
    return web.json_response(detail.dump())


@routes.delete(r"/schemas/{sid:\d+}/")
async def delete_schema(request: web.Request) -> web.Response:
    await _blocking(_repo(request).delete_schema, _path_id(request, "sid"))
    return web.Response(status=204)


# classification sets and labels

@routes.get("/classificationsets/")
async def list_classification_sets(request: web.Request) -> web.Response:
    offset, limit, code = _paging(request)
    page = await _blocking(_repo(request).list_classification_sets, offset, limit, code)
    return _page_response(request, page, [classification_set_out(s).dump() for s in page.items])


@routes.post("/classificationsets/")
async def create_classification_set(request: web.Request) -> web.Response:
    body = _validate(ClassificationSetIn, await _json_body(request))
    cls_set = await _blocking(_repo(request).create_classification_set, body.collection_id, body.schema_id,
                              body.code, body.name)
    return _created(classification_set_out(cls_set))


@routes.get(r"/classificationsets/{clsid:\d+}/")
async def get_classification_set(request: web.Request) -> web.Response:
    cls_set = await _blocking(_repo(request).get_classification_set, _path_id(request, "clsid"))
    return web.json_response(classification_set_out(cls_set).dump())


@routes.delete(r"/classificationsets/{clsid:\d+}/")
async def delete_classification_set(request: web.Request) -> web.Response:
    await _blocking(_repo(request).delete_classification_set, _path_id(request, "clsid"))
    return web.Response(status=204)


def _group_labels(repo: Repository, labels: List[LabelRecord]) -> List[dict]:
    """One entry per (document, attribute), ordered by document then attribute id."""
    attribute_of: Dict[int, int] = {}
    groups: Dict[tuple, List[int]] = {}
    for label in labels:
        value_id = label.attribute_value_id
        if value_id not in attribute_of:
            attribute_of[value_id] = repo.get_attribute_value(value_id).attribute_id
        groups.setdefault((label.document_id, attribute_of[value_id]), []).append(value_id)
    return [
        LabelOut(document_id=document_id, attribute_id=attribute_id, value_ids=sorted(value_ids)).dump()
        for (document_id, attribute_id), value_ids in sorted(groups.items())
    ]


def _labels(repo: Repository, set_id: int, document_id: Optional[int] = None) -> List[dict]:
    return _group_labels(repo, repo.list_labels(set_id, document_id=document_id))


def _add_labels(repo: Repository, set_id: int, entries: List[LabelIn]) -> List[dict]:
    repo.get_classification_set(set_id)
    for entry in entries:
        try:
            repo.get_attribute(entry.attribute_id)
        except NotFoundError:
            raise InvalidRequestError(f"attribute {entry.attribute_id} does not exist") from None
        for value_id in entry.value_ids:
            try:
                value = repo.get_attribute_value(value_id)
            except NotFoundError:
                raise InvalidRequestError(f"attribute value {value_id} does not exist") from None
            if value.attribute_id != entry.attribute_id:
                raise InvalidRequestError(f"attribute value {value_id} is not a value of attribute "
                                          f"{entry.attribute_id}")
    labels = []
    with repo.db.transaction():
        for entry in entries:
            for value_id in entry.value_ids:
                labels.append(repo.add_label(set_id, entry.document_id, value_id))
    return _group_labels(repo, labels)


@routes.get(r"/classificationsets/{clsid:\d+}/labels/")
async def list_labels(request: web.Request) -> web.Response:
    offset, limit, _ = _paging(request)
    groups = await _blocking(_labels, _repo(request), _path_id(request, "clsid"))
    page = Page(items=groups[offset:offset + limit], offset=offset, limit=limit, total=len(groups))
    return _page_response(request, page, page.items)


@routes.post(r"/classificationsets/{clsid:\d+}/labels/")
async def add_labels(request: web.Request) -> web.Response:
    set_id = _path_id(request, "clsid")
    body = await _json_body(request)
    if isinstance(body, dict):
        body = [body]
    entries = _validate_list(LabelIn, body)
    groups = await _blocking(_add_labels, _repo(request), set_id, entries)
    href = classification_set_href(set_id) + "labels/"
    return web.json_response(groups, status=201, headers={"Location": href})


@routes.get(r"/classificationsets/{clsid:\d+}/labels/{docid:\d+}/")
async def get_document_labels(request: web.Request) -> web.Response:
    groups = await _blocking(_labels, _repo(request), _path_id(request, "clsid"), _path_id(request, "docid"))
    return web.json_response(groups)


@routes.delete(r"/classificationsets/{clsid:\d+}/labels/{docid:\d+}/")
async def delete_document_labels(request: web.Request) -> web.Response:
    await _blocking(_repo(request).delete_labels, _path_id(request, "clsid"), _path_id(request, "docid"))
    return web.Response(status=204)


# trainers

@routes.get("/trainers/")
async def list_trainers(request: web.Request) -> web.Response:
    trainers = await _blocking(_repo(request).list_trainers)
    page = Page(items=trainers, offset=0, limit=len(trainers), total=len(trainers))
    return _page_response(request, page, [trainer_out(t).dump() for t in trainers])


# classifiers and trainings

@routes.get("/classifiers/")
async def list_classifiers(request: web.Request) -> web.Response:
    offset, limit, code = _paging(request)
    page = await _blocking(_repo(request).list_classifiers, offset, limit, code)
    return _page_response(request, page, [classifier_out(c).dump() for c in page.items])


@routes.post("/classifiers/")
async def create_classifier(request: web.Request) -> web.Response:
    body = _validate(ClassifierIn, await _json_body(request))
    classifier = await _blocking(_repo(request).create_classifier, body.attribute_id, body.code, body.name)
    return _created(classifier_out(classifier))


@routes.get(r"/classifiers/{clsid:\d+}/")
async def get_classifier(request: web.Request) -> web.Response:
    classifier = await _blocking(_repo(request).get_classifier, _path_id(request, "clsid"))
    return web.json_response(classifier_out(classifier).dump())


@routes.delete(r"/classifiers/{clsid:\d+}/")
async def delete_classifier(request: web.Request) -> web.Response:
    classifier_id = _path_id(request, "clsid")
    await _blocking(_repo(request).delete_classifier, classifier_id)
    request.app[POOL].cache.evict(classifier_id)
    return web.Response(status=204)


@routes.post(r"/classifiers/{clsid:\d+}/trainings/")
async def create_training(request: web.Request) -> web.Response:
    classifier_id = _path_id(request, "clsid")
    body = _validate(TrainingIn, await _json_body(request))
    settings = body.settings if body.settings is not None else dict(request.app[CONFIG].TRAINING_DEFAULTS)
    pool = request.app[POOL]

    def submit():
        classifier = _repo(request).get_classifier(classifier_id)
        return pool.submit_training(classifier.id, body.classification_set_id, body.trainer_id, settings)

    session_id, task_id = await _blocking(submit)
    href = training_href(classifier_id, session_id)
    return web.json_response({"href": href, "sessionId": session_id, "taskId": task_id}, status=202,
                             headers={"Location": href})


def _training_status(repo: Repository, pool: WorkerPool, classifier_id: int, training_id: int) -> dict:
    session = repo.get_training_session(training_id)
    if session.classifier_id != classifier_id:
        raise NotFoundError(f"training {session.id} not found for classifier {classifier_id}")
    status = {
        "href": training_href(classifier_id, session.id),
        "id": session.id,
        "classifierId": session.classifier_id,
        "classificationSetId": session.classification_set_id,
        "trainerId": session.trainer_id,
        "created": session.created,
    }
    if session.task_id:
        snapshot = pool.query_task(session.task_id)
        snapshot.pop("task_id", None)
        snapshot.pop("session_id", None)
        status.update(snapshot)
    return status


async def get_training(request: web.Request) -> web.Response:
    status = await _blocking(_training_status, _repo(request), request.app[POOL], _path_id(request, "clsid"),
                             _path_id(request, "trnid"))
    return web.json_response(status)


routes.get(r"/classifiers/{clsid:\d+}/trainings/{trnid:\d+}")(get_training)
routes.get(r"/classifiers/{clsid:\d+}/trainings/{trnid:\d+}/")(get_training)


# classification requests

async def _await_task(pool: WorkerPool, task_id: str, timeout: float):
    deadline = time.monotonic() + timeout
    while True:
        task = await _blocking(pool.queue.get, task_id)
        if task.finished:
            return task
        if time.monotonic() >= deadline:
            raise asyncio.TimeoutError(f"classification task {task_id} did not finish within {timeout} s")
        await asyncio.sleep(POLL_INTERVAL)


def _trained_classifier(repo: Repository, body: ClassificationRequestIn):
    classifier = repo.get_classifier(body.classifier_id)
    if classifier.active_checkpoint_id is None:
        raise NotTrainedError(f"classifier {classifier.id} is not trained")
    for document_id in body.document_ids:
        try:
            repo.get_document(document_id)
        except NotFoundError:
            raise InvalidRequestError(f"document {document_id} does not exist") from None
        if not repo.has_content(document_id):
            raise InvalidRequestError(f"document {document_id} has no content")
    return classifier


@routes.post("/classification_requests/")
async def classification_request(request: web.Request) -> web.Response:
    body = _validate(ClassificationRequestIn, await _json_body(request))
    classifier = await _blocking(_trained_classifier, _repo(request), body)
    results: List[dict] = []
    if body.document_ids:
        pool = request.app[POOL]
        task_id = await _blocking(pool.submit_classification, classifier.id, body.document_ids)
        task = await _await_task(pool, task_id, request.app[CONFIG].CLASSIFY_TIMEOUT)
        if task.state == FAILURE:
            return _task_error(task.error)
        results = [{"document_id": d, **task.result[str(d)]} for d in body.document_ids]
    return web.json_response({"classifier_id": classifier.id, "results": results})


def _task_error(error: Optional[str]) -> web.Response:
    name, _, message = (error or "").partition(": ")
    status = STATUS_BY_NAME.get(name, 500)
    if status == 500:
        return json_error(500, "InternalError", "classification failed")
    return json_error(status, name, message)
