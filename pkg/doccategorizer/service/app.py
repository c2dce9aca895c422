import asyncio
from typing import Optional

from aiohttp import web
from loguru import logger

from doccategorizer.config import ServiceConfig
from doccategorizer.preprocessing.embeddings import EmbeddingModel, load_embeddings
from doccategorizer.repository import Repository
from doccategorizer.service.handlers import POOL, REPOSITORY, routes
from doccategorizer.service.middlewares import CONFIG, auth_middleware, error_middleware
from doccategorizer.worker import WorkerPool

STOP_TIMEOUT = 30.0


def create_app(config: ServiceConfig, repository: Optional[Repository] = None, pool: Optional[WorkerPool] = None,
               embedding_model: Optional[EmbeddingModel] = None) -> web.Application:
    """Wire the REST surface to a repository and a worker pool.

    Whatever is not passed in is built from ``config`` and owned by the app:
    the pool starts with the app and stops on cleanup, and an owned repository
    is closed after it.
    """
    owns_repository = repository is None
    if repository is None:
        config.ensure_data_root()
        repository = Repository(config.DATA_ROOT, config.DATABASE, echo=config.DATABASE_ECHO)
    if pool is None:
        if embedding_model is None and config.EMBEDDINGS:
            embedding_model = load_embeddings(config.EMBEDDINGS, config.EMBEDDINGS_FORMAT)
        pool = WorkerPool(repository, size=config.WORKERS, embedding_model=embedding_model)

    app = web.Application(middlewares=[error_middleware, auth_middleware])
    app[CONFIG] = config
    app[REPOSITORY] = repository
    app[POOL] = pool
    app.add_routes(routes)

    async def start_pool(app: web.Application) -> None:
        app[POOL].start()

    async def stop_pool(app: web.Application) -> None:
        await asyncio.get_running_loop().run_in_executor(None, app[POOL].stop, STOP_TIMEOUT)
        if owns_repository:
            app[REPOSITORY].close()

    app.on_startup.append(start_pool)
    app.on_cleanup.append(stop_pool)
    return app


def serve(config: ServiceConfig) -> None:
    app = create_app(config)
    logger.info("classification service listening on http://{}:{} (auth = {})", config.HOST, config.PORT,
                config.SVC_AUTH)
    web.run_app(app, host=config.HOST, port=config.PORT, print=None)
