"""
Logging for the engine: console on stderr, rotating run and error logs.

stdout is reserved for command output (shape lines, report rows, export
paths), so nothing here ever writes to it.
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

from config.settings import LOGS_PATH, LOG_LEVEL

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
MAX_LOG_BYTES = 5 * 1024 * 1024
LOG_BACKUPS = 3


def _level(name: str | int) -> int:
    if isinstance(name, int):
        return name
    value = logging.getLevelName(str(name).upper())
    return value if isinstance(value, int) else logging.INFO


def _rotating(path: Path, level: int, formatter: logging.Formatter) -> RotatingFileHandler:
    handler = RotatingFileHandler(path, maxBytes=MAX_LOG_BYTES, backupCount=LOG_BACKUPS, encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logger(name: str = "frugaltree", level: str | int = LOG_LEVEL, log_dir: Path = LOGS_PATH) -> logging.Logger:
    """
    Configure `name` once: stderr console, `<name>.log` and `<name>_errors.log`.

    Args:
        name: Logger name, also the log file stem
        level: Level name or number for console and run log
        log_dir: Directory of the rotating files

    Returns:
        The configured logger; later calls return it unchanged
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    level = _level(level)
    logger.setLevel(level)
    logger.propagate = False
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(formatter)
    logger.addHandler(console)

    log_dir.mkdir(parents=True, exist_ok=True)
    logger.addHandler(_rotating(log_dir / f"{name}.log", level, formatter))
    logger.addHandler(_rotating(log_dir / f"{name}_errors.log", logging.ERROR, formatter))
    return logger


def set_level(level: str | int, name: str = "frugaltree") -> None:
    """Change the logger and its non-error handlers to `level` (the --log-level flag)."""
    target = logging.getLogger(name)
    level = _level(level)
    target.setLevel(min(level, logging.ERROR))
    for handler in target.handlers:
        if handler.level != logging.ERROR:
            handler.setLevel(level)


logger = setup_logger("frugaltree")
