import asyncio
import hmac
from typing import Dict, Optional

from aiohttp import BasicAuth, hdrs, web
from loguru import logger

from doccategorizer.config import ServiceConfig
from doccategorizer.errors import (
    CategorizerError,
    DuplicateCodeError,
    IntegrityError,
    InvalidRequestError,
    NotFoundError,
    NotTrainedError,
    SettingsError,
    ShapeError,
)

REALM = "classification-service"
CONFIG = web.AppKey("config", ServiceConfig)

ERROR_STATUS = [
    (InvalidRequestError, 400),
    (IntegrityError, 400),
    (SettingsError, 400),
    (ShapeError, 400),
    (NotFoundError, 404),
    (DuplicateCodeError, 409),
    (NotTrainedError, 409),
]
# same mapping by class name, for errors that come back from a worker as text
STATUS_BY_NAME = {cls.__name__: status for cls, status in ERROR_STATUS}
STATUS_BY_NAME["NoContentError"] = 404

# headers of aiohttp's own HTTP errors that must survive the JSON rewrite
KEPT_HEADERS = (hdrs.ALLOW, hdrs.WWW_AUTHENTICATE)


def json_error(status: int, error: str, message: str, headers: Optional[Dict[str, str]] = None) -> web.Response:
    return web.json_response({"error": error, "message": message}, status=status, headers=headers)


def status_for(error: BaseException) -> int:
    for cls, status in ERROR_STATUS:
        if isinstance(error, cls):
            return status
    return 500


@web.middleware
async def error_middleware(request: web.Request, handler):
    try:
        return await handler(request)
    except web.HTTPException as e:
        if e.status < 400:
            raise
        headers = {k: e.headers[k] for k in KEPT_HEADERS if k in e.headers}
        return json_error(e.status, e.__class__.__name__, e.reason, headers=headers)
    except CategorizerError as e:
        status = status_for(e)
        if status == 500:
            logger.exception("{} {} failed", request.method, request.path)
            return json_error(500, "InternalError", "internal server error")
        logger.info("{} {} -> {}: {}", request.method, request.path, status, e)
        return json_error(status, e.__class__.__name__, str(e))
    except asyncio.TimeoutError as e:
        return json_error(504, "Timeout", str(e) or "timed out waiting for the worker")
    except Exception:
        logger.exception("{} {} failed", request.method, request.path)
        return json_error(500, "InternalError", "internal server error")


def authorized(header: Optional[str], users: Dict[str, str]) -> bool:
    if not header:
        return False
    try:
        auth = BasicAuth.decode(header)
    except ValueError:
        return False
    password = users.get(auth.login)
    return password is not None and hmac.compare_digest(password.encode("utf-8"), auth.password.encode("utf-8"))


@web.middleware
async def auth_middleware(request: web.Request, handler):
    config = request.app[CONFIG]
    if config.SVC_AUTH and not authorized(request.headers.get(hdrs.AUTHORIZATION), config.SVC_USERS):
        logger.info("{} {} -> 401", request.method, request.path)
        return json_error(401, "Unauthorized", "authentication required",
                          headers={hdrs.WWW_AUTHENTICATE: f'Basic realm="{REALM}"'})
    return await handler(request)
