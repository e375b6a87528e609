"""
Structured logging setup.
"""
import logging
import sys
from pathlib import Path
from typing import Optional

import structlog

from config import settings

_configured = False


def configure_logging(level: Optional[str] = None, json_output: Optional[bool] = None,
                      log_file: Optional[str] = None, force: bool = False) -> None:
    """Configure structlog once for the whole process.

    Args:
        level: Log level name; defaults to ``settings.log_level``.
        json_output: Render JSON lines instead of the console format.
        log_file: Write log lines to this file instead of stderr.
        force: Reconfigure even if logging was already set up.
    """
    global _configured
    if _configured and not force:
        return

    level_name = (level or settings.log_level).upper()
    numeric_level = getattr(logging, level_name, logging.WARNING)
    use_json = settings.log_json if json_output is None else json_output
    target = log_file or settings.log_file
    if target and not Path(target).is_absolute() and Path(target).parent == Path("."):
        target = settings.logs_dir / target

    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        handler: logging.Handler = logging.FileHandler(target, encoding="utf-8")
    else:
        handler = logging.StreamHandler(sys.stderr)
    logging.basicConfig(format="%(message)s", level=numeric_level, handlers=[handler], force=True)

    renderer = structlog.processors.JSONRenderer() if use_json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _configured = True
