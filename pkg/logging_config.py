"""
Logging configuration for xps-leapfrog.

Every module logs through a child of the ``xps-leapfrog`` application logger.
Console output is colored; file output goes to a rotating log under LOG_DIR.
Integrators never log per step, only per run.
"""

import logging
import logging.handlers
import os
import sys
import time
from pathlib import Path
from typing import Optional

APP_LOGGER = "xps-leapfrog"


class ColoredFormatter(logging.Formatter):
    """Formatter that colors the level name for terminal output."""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    RESET = '\033[0m'

    def format(self, record):
        levelname = record.levelname
        color = self.COLORS.get(levelname)
        if color:
            record.levelname = f"{color}{levelname}{self.RESET}"
        try:
            return super().format(record)
        finally:
            # records are shared between handlers
            record.levelname = levelname


def env_flag(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


def setup_logging(
    name: str = APP_LOGGER,
    level: str = "INFO",
    log_dir: Optional[str] = None,
    console_output: bool = True,
    file_output: bool = False,
    max_file_size: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5
) -> logging.Logger:
    """
    Configure a logger with console and/or rotating file handlers.

    Args:
        name: Logger name
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_dir: Directory for log files (defaults to ./logs)
        console_output: Whether to log to stdout
        file_output: Whether to log to ``<log_dir>/<name>.log``
        max_file_size: Size at which the log file is rotated
        backup_count: Number of rotated files to keep

    Returns:
        The configured logger

    Raises:
        ValueError: If ``level`` is not a logging level name
    """
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level: {level}")

    logger = logging.getLogger(name)
    logger.setLevel(numeric_level)
    logger.handlers.clear()

    if console_output:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(numeric_level)
        console_handler.setFormatter(ColoredFormatter(
            fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%H:%M:%S'
        ))
        logger.addHandler(console_handler)

    if file_output:
        log_path = Path(log_dir) if log_dir else Path.cwd() / "logs"
        log_path.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_path / f"{name}.log",
            maxBytes=max_file_size,
            backupCount=backup_count,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(
            fmt='%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger. Children of the application logger inherit its handlers.

    Args:
        name: Logger name, e.g. ``xps-leapfrog.splitting`` (optional)

    Returns:
        Logger instance
    """
    if name is None or name == APP_LOGGER:
        logger = logging.getLogger(APP_LOGGER)
        if not logger.handlers:
            return setup_logging(APP_LOGGER, level=os.getenv("LOG_LEVEL", "INFO"))
        return logger

    if not name.startswith(APP_LOGGER + "."):
        name = f"{APP_LOGGER}.{name}"
    # make sure the parent has handlers so children have somewhere to go
    get_logger(APP_LOGGER)
    return logging.getLogger(name)


def set_log_level(level: str):
    """
    Set the level on every ``xps-leapfrog`` logger and its console handlers.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    """
    log_level = getattr(logging, level.upper())

    for logger_name in list(logging.Logger.manager.loggerDict):
        if logger_name == APP_LOGGER or logger_name.startswith(APP_LOGGER + "."):
            logger = logging.getLogger(logger_name)
            logger.setLevel(log_level)
            for handler in logger.handlers:
                if not isinstance(handler, logging.FileHandler):
                    handler.setLevel(log_level)


def configure_from_env() -> logging.Logger:
    """Configure the application logger from LOG_* environment variables."""
    return setup_logging(
        level=os.getenv("LOG_LEVEL", "INFO"),
        log_dir=os.getenv("LOG_DIR"),
        console_output=env_flag("LOG_TO_CONSOLE", True),
        file_output=env_flag("LOG_TO_FILE", False),
        max_file_size=int(os.getenv("LOG_MAX_FILE_SIZE", 10 * 1024 * 1024)),
        backup_count=int(os.getenv("LOG_BACKUP_COUNT", 5)),
    )


class PerformanceLogger:
    """Times a named operation and logs its wall-clock duration."""

    def __init__(self, logger_name: str = f"{APP_LOGGER}.performance"):
        self.logger = get_logger(logger_name)
        self.operation: Optional[str] = None
        self.start_time: Optional[float] = None
        self.elapsed: float = 0.0

    def start(self, operation: str):
        """Start timing an operation."""
        self.operation = operation
        self.start_time = time.perf_counter()
        self.logger.debug(f"Starting operation: {operation}")

    def end(self) -> float:
        """Stop timing, log and return the duration in seconds."""
        if self.start_time is not None:
            self.elapsed = time.perf_counter() - self.start_time
            self.start_time = None
            self.logger.info(f"Operation '{self.operation}' completed in {self.elapsed:.3f} seconds")
        return self.elapsed

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end()
