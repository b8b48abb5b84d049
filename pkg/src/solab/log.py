"""Logging setup for the solab command line.

Library modules only call ``logging.getLogger(__name__)``; handlers are
installed here, once, by the CLI.
"""

import logging

from rich.console import Console
from rich.logging import RichHandler

LEVELS = {0: logging.WARNING, 1: logging.INFO}


def setup_logging(verbosity: int = 0, console: Console | None = None) -> logging.Logger:
    """Route the ``solab`` logger through a single RichHandler on stderr.

    Args:
        verbosity: 0 for warnings, 1 for info, 2 or more for debug.
        console: Optional console, mainly for tests.

    Returns:
        The configured package logger.
    """
    level = LEVELS.get(verbosity, logging.DEBUG)
    logger = logging.getLogger("solab")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    # no timestamps: log output must be reproducible
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_time=False,
        show_path=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger
