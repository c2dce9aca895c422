import ast
import os
from typing import Any, Dict, Optional

from loguru import logger
from pydantic import BaseModel, Field, field_validator, model_validator

from doccategorizer.errors import SettingsError


class ServiceConfig(BaseModel):
    # Directory where service data is stored
    DATA_ROOT: str
    # Connection string for the database, defaults to a sqlite file in DATA_ROOT
    DATABASE: Optional[str] = None
    # Log every database statement
    DATABASE_ECHO: bool = False
    SVC_AUTH: bool = False
    SVC_USERS: Dict[str, str] = Field(default_factory=dict)
    HOST: str = "127.0.0.1"
    PORT: int = 5000
    WORKERS: int = 2
    LOG_LEVEL: str = "INFO"
    EMBEDDINGS: Optional[str] = None
    EMBEDDINGS_FORMAT: str = "glove_text"
    TRAINING_DEFAULTS: Dict[str, Any] = Field(default_factory=dict)
    CLASSIFY_TIMEOUT: float = 60.0

    model_config = {"extra": "forbid"}

    @field_validator("WORKERS")
    @classmethod
    def _check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("WORKERS must be at least 1")
        return value

    @model_validator(mode="after")
    def _default_database(self) -> "ServiceConfig":
        if not self.DATABASE:
            self.DATABASE = "sqlite:///" + os.path.join(self.DATA_ROOT, "repo.db")
        return self

    def ensure_data_root(self) -> str:
        try:
            os.makedirs(self.DATA_ROOT, exist_ok=True)
        except OSError as e:
            raise SettingsError(f"DATA_ROOT {self.DATA_ROOT!r} is not writable: {e}") from e
        if not os.access(self.DATA_ROOT, os.W_OK):
            raise SettingsError(f"DATA_ROOT {self.DATA_ROOT!r} is not writable")
        return self.DATA_ROOT

    @property
    def log_file(self) -> str:
        return os.path.join(self.DATA_ROOT, "logs", "service.log")


def _literal(text: str) -> Any:
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SettingsError(f"config line {line_no}: expected KEY = value, got {raw!r}")
        key = key.strip()
        try:
            values[key] = ast.literal_eval(value.strip())
        except (ValueError, SyntaxError) as e:
            raise SettingsError(f"config line {line_no}: cannot parse value of {key}: {e}") from e
    return values


def load_config(path: Optional[str] = None, environ: Optional[Dict[str, str]] = None, **overrides) -> ServiceConfig:
    """Read a config file, apply environment overrides, then keyword overrides."""
    environ = os.environ if environ is None else environ
    values: Dict[str, Any] = {}
    if path:
        with open(path, "r", encoding="utf-8") as f:
            values.update(parse_config_text(f.read()))
    for key in ServiceConfig.model_fields:
        if key in environ:
            values[key] = _literal(environ[key])
    values.update(overrides)
    unknown = set(values) - set(ServiceConfig.model_fields)
    if unknown:
        raise SettingsError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        config = ServiceConfig(**values)
    except ValueError as e:
        raise SettingsError(str(e)) from e
    logger.info("config loaded: data_root = {}, database = {}", config.DATA_ROOT, config.DATABASE)
    return config
