import os
import logging
from logging.handlers import TimedRotatingFileHandler
from dotenv import load_dotenv

load_dotenv()

ROOT_LOGGER = "trackmpc"
DEFAULT_LOG_FILE = os.path.join("logs", "trackmpc.log")

# (log file, level) the root handlers were built for
_configured: tuple[str, int] | None = None


class _ConsoleFilter(logging.Filter):
    """Hide file-only verbose records from the console handler."""

    def filter(self, record: logging.LogRecord) -> bool:
        if record.levelno >= logging.ERROR:
            return True
        return getattr(record, "console", True)


def _ensure_parent_dir(path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)


def _level_from_env() -> int:
    level = logging.getLevelName(os.getenv("LOG_LEVEL", "INFO").strip().upper())
    return level if isinstance(level, int) else logging.INFO


def configure_logging(force: bool = False) -> logging.Logger:
    """
    Attach handlers to the shared ``trackmpc`` logger.

    - File logging to LOG_FILE_PATH, rotated every 5 days (UTC), archives
      suffixed with a timestamp
    - Level from LOG_LEVEL (any standard level name, INFO when unknown)
    - DEBUG: also log to stderr, minus records tagged ``console=False``
      (solver iteration traces, warm-start details)

    Handlers are rebuilt only when LOG_FILE_PATH or LOG_LEVEL changed since
    the last call, so every module logger shares one rotating file handler.
    """
    global _configured
    root = logging.getLogger(ROOT_LOGGER)
    log_file = os.getenv("LOG_FILE_PATH") or DEFAULT_LOG_FILE
    level = _level_from_env()
    if not force and _configured == (log_file, level) and root.handlers:
        return root

    for handler in root.handlers:
        handler.close()
    root.handlers.clear()
    root.setLevel(level)
    root.propagate = False

    _ensure_parent_dir(log_file)
    fmt = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    file_handler = TimedRotatingFileHandler(
        filename=log_file,
        when="D",
        interval=5,
        utc=True,
        encoding="utf-8",
        delay=True,
    )
    file_handler.suffix = "%Y%m%d_%H%M%S"
    file_handler.setFormatter(fmt)
    file_handler.setLevel(level)
    root.addHandler(file_handler)

    if level <= logging.DEBUG:
        sh = logging.StreamHandler()
        sh.setFormatter(fmt)
        sh.setLevel(logging.DEBUG)
        sh.addFilter(_ConsoleFilter())
        root.addHandler(sh)

    _configured = (log_file, level)
    return root


def get_logger(name: str) -> logging.Logger:
    """Module logger under ``trackmpc``; its records go to the shared handlers."""
    configure_logging()
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
