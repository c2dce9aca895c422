from .app import create_app, serve
from .handlers import POOL, REPOSITORY, routes
from .middlewares import CONFIG, REALM

__all__ = [
    "create_app",
    "serve",
    "POOL",
    "REPOSITORY",
    "routes",
    "CONFIG",
    "REALM",
]
