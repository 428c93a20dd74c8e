import logging
import sys
from typing import Optional

import structlog
from config import settings


def setup_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None,
    log_file: Optional[str] = None
):
    """Configura logging strutturato per l'applicazione"""

    level_name = (log_level or settings.log_level).upper()
    renderer = log_format or settings.log_format
    log_file = log_file or settings.log_file

    # Silenzia librerie esterne
    logging.getLogger('asyncio').setLevel(logging.WARNING)
    logging.getLogger('concurrent.futures').setLevel(logging.WARNING)

    handlers = [logging.StreamHandler(sys.stderr)]  # Console
    if log_file:
        # File handler opzionale (es. output/log.txt)
        file_handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
        file_handler.setLevel(getattr(logging, level_name))
        file_handler.setFormatter(logging.Formatter('%(message)s'))
        handlers.append(file_handler)

    # Configura logging standard
    logging.basicConfig(
        format="%(message)s",
        level=getattr(logging, level_name),
        handlers=handlers,
        force=True
    )

    # Processors per structlog
    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
    ]

    if renderer == "json":
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str):
    """Ottieni un logger strutturato"""
    return structlog.get_logger(name)
