"""
Logging - stderr status lines under the `gmar` logger

stdout is reserved for machine-readable output, so every human-facing
status line goes through here. Lines carry bracket tags ([OK], [WARN],
[ERROR], [EPOCH 3/30]).
"""
import logging
import sys

ROOT_LOGGER = "gmar"

_LEVEL_TAGS = {
    logging.DEBUG: "[DEBUG]",
    logging.INFO: "",
    logging.WARNING: "[WARN]",
    logging.ERROR: "[ERROR]",
    logging.CRITICAL: "[ERROR]",
}


class TagFormatter(logging.Formatter):
    """Prefixes warnings and errors with a tag unless the message already has one."""

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        tag = _LEVEL_TAGS.get(record.levelno, "")
        if tag and not message.startswith("["):
            return f"{tag} {message}"
        return message


def configure(verbosity: int = 0, stream=None) -> logging.Logger:
    """
    Install one stderr handler on the package logger.

    verbosity 0 -> warnings only, 1 -> progress, 2+ -> debug.
    Safe to call repeatedly; the handler is replaced, not stacked.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(TagFormatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def get_logger(name: str) -> logging.Logger:
    """Child of the package logger, e.g. get_logger(__name__)."""
    if not name.startswith(ROOT_LOGGER):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)
