import os
import sys
from typing import Optional

from loguru import logger


def configure_logging(level: str = "INFO", log_file: Optional[str] = None):
    logger.remove()
    logger.add(sys.stderr, level=level)
    if log_file:
        os.makedirs(os.path.dirname(log_file), exist_ok=True)
        logger.add(log_file, level=level, rotation="10 MB", retention=5, enqueue=True)
    logger.debug("logging configured: level = {}, file = {}", level, log_file)
