import os
import sys
import logging
import datetime
from dateutil.tz import tzlocal

LOGGER_NAME = 'miprobe'
LOG_FORMAT = '%(asctime)s\t%(levelname)s\t%(threadName)s\t%(message)s'
LOG_DATE_FORMAT = '%Y-%m-%dT%H:%M:%S.%f%z'
LOG_LEVEL = logging.INFO
LOG_LEVEL_ENV_VAR = 'MIPROBE_LOG_LEVEL'


def resolve_level(value, default=LOG_LEVEL):
    """
    Turns a level given as a number ('10') or a name ('debug') into a
    logging level. Anything else yields the default.
    """
    if value is None or str(value).strip() == '':
        return default
    value = str(value).strip()
    if value.isdigit():
        return int(value)
    level = logging.getLevelName(value.upper())
    return level if isinstance(level, int) else default


def get_logger(log_level=LOG_LEVEL):
    """
    Gets the package logger, creating it on first use. Records go to stderr
    so that stdout carries only command output. MIPROBE_LOG_LEVEL, when
    set, overrides log_level.

    Returns:
        (logging.Logger): the shared 'miprobe' logger
    """
    if LOGGER_NAME in logging.root.manager.loggerDict:
        return logging.getLogger(LOGGER_NAME)

    log_level = resolve_level(os.environ.get(LOG_LEVEL_ENV_VAR), default=log_level)
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(log_level)
    handler.setFormatter(LogFormatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT))

    logger = logging.getLogger(LOGGER_NAME)
    logger.addHandler(handler)
    logger.setLevel(log_level)
    logger.propagate = False
    return logger


class LogFormatter(logging.Formatter):
    """Local-timezone timestamps with microseconds."""
    def formatTime(self, record, datefmt=None):
        stamp = datetime.datetime.fromtimestamp(record.created, tz=tzlocal())
        return stamp.strftime(datefmt or LOG_DATE_FORMAT)
