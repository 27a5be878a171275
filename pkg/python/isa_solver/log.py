"""
Logging setup shared by the CLI and the HTTP API.

Level comes from the caller or from the ISA_LOG_LEVEL environment variable
(error, info, debug).
"""

import logging
import os

LOG_LEVELS = {
    'error': logging.ERROR,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}

DEFAULT_LEVEL = 'info'
ENV_VAR = 'ISA_LOG_LEVEL'
LOG_FORMAT = '%(asctime)s %(levelname)-7s %(name)s: %(message)s'

logger = logging.getLogger('isa_solver')


def resolve_level(level=None):
    """Map a level name (or None -> environment) to a logging constant"""
    name = level if level is not None else os.environ.get(ENV_VAR, DEFAULT_LEVEL)
    key = str(name).strip().lower()
    if key not in LOG_LEVELS:
        logger.warning("Unknown log level %r, using %s", name, DEFAULT_LEVEL)
        key = DEFAULT_LEVEL
    return LOG_LEVELS[key]


def configure_logging(level=None, stream=None):
    """
    Install a single stream handler on the package logger.

    Calling it again replaces the handler instead of stacking a second one.
    """
    numeric = resolve_level(level)
    for handler in list(logger.handlers):
        if getattr(handler, '_isa_handler', False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(stream)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._isa_handler = True
    logger.addHandler(handler)
    logger.setLevel(numeric)
    return logger
