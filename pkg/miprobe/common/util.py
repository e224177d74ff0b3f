import os
import numbers
from datetime import datetime
from dateutil import tz

THREADS_ENV_VAR = 'MIPROBE_THREADS'


def get_current_datetime(tz=tz.UTC, format='%Y-%m-%dT%H:%M:%SZ'):
    return datetime.now(tz).strftime(format)


def parse_int_list(value):
    """
    Parses a comma-separated list of integers, e.g. '0,1,2'.

    Args:
        value (str, int or iterable): the text to parse; a single integer
            becomes a one-element list and an iterable of ints is returned
            as a list

    Returns:
        (list): the integers, in the order given

    Raises:
        (ValueError): if a token is not an integer or the list is empty
    """
    if isinstance(value, numbers.Integral):
        return [int(value)]
    if not isinstance(value, str):
        try:
            values = [int(v) for v in value]
        except TypeError:
            raise ValueError(f'{value!r} is neither an integer nor a list of integers')
        if not values:
            raise ValueError('the integer list is empty')
        return values
    tokens = [t.strip() for t in value.split(',') if t.strip()]
    if not tokens:
        raise ValueError(f'no integers found in \'{value}\'')
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ValueError(f'\'{value}\' is not a comma-separated list of integers')


def get_max_workers():
    """
    Gets the parallelism cap. The env var MIPROBE_THREADS, when set, must
    be a positive integer; otherwise the CPU count is used.

    Returns:
        (int): the maximum number of worker threads
    """
    env_threads = os.environ.get(THREADS_ENV_VAR, None)
    if env_threads:
        try:
            threads = int(env_threads)
        except ValueError:
            threads = 0
        if threads < 1:
            raise ValueError(
                f'{THREADS_ENV_VAR} must be a positive integer, got \'{env_threads}\''
            )
        return threads
    return os.cpu_count() or 1
