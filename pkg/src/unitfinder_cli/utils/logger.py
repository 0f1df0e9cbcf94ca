import sys
from functools import partialmethod

from loguru import logger

LOG_FORMAT = "[ <level>{level: <8}</level> ] {message}"

# Remove the default logger
logger.remove()

_SINK_ID = logger.add(
    sys.stderr,
    backtrace=False,
    colorize=True,
    format=LOG_FORMAT,
    level="INFO",
)

# Per-epoch training and search lines
logger.level("PROGRESS", no=22, color="<light-black>", icon="⏳")
logger.__class__.progress = partialmethod(logger.__class__.log, "PROGRESS")  # type: ignore


def set_verbosity(quiet: bool = False, verbose: bool = False) -> None:
    """
    Re-install the stderr sink with a different threshold.

    ``quiet`` keeps warnings and errors only, ``verbose`` shows progress and debug lines. When both
    are set, ``quiet`` wins.
    """
    global _SINK_ID  # pylint: disable=global-statement

    level = "WARNING" if quiet else "DEBUG" if verbose else "INFO"
    logger.remove(_SINK_ID)
    _SINK_ID = logger.add(sys.stderr, backtrace=False, colorize=True, format=LOG_FORMAT, level=level)
