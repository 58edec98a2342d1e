"""
Logging Setup
Rich console logging for the sltstack logger tree
"""

import logging
from typing import Optional, Union

from rich.console import Console
from rich.logging import RichHandler

ROOT_LOGGER = "sltstack"


def setup_logging(level: Union[str, int] = "INFO", console: Optional[Console] = None) -> logging.Logger:
    """
    Attach one RichHandler to the ``sltstack`` logger

    Calling it again only changes the level.

    Args:
        level: Level name or number
        console: Console to render on (stderr by default)

    Returns:
        logging.Logger: the package root logger
    """
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"unknown log level {level!r}")
        level = resolved

    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=console or Console(stderr=True),
            show_time=True,
            show_path=False,
            rich_tracebacks=True,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
    for handler in logger.handlers:
        handler.setLevel(level)
    return logger
