import functools
import time
from miprobe.common import log

LOGGER = log.get_logger()


class Timer:
    """Wall-clock timer; run reports record its duration in seconds."""
    def __init__(self):
        self._start = self._end = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.end()
        return False

    def start(self):
        self._start, self._end = time.perf_counter(), None

    def end(self):
        self._end = time.perf_counter()

    @property
    def duration(self):
        if self._start is None or self._end is None:
            return None
        return self._end - self._start


def timeit(f):
    """Logs the wall time of each call at DEBUG level."""
    @functools.wraps(f)
    def inner(*args, **kwargs):
        with Timer() as timer:
            val = f(*args, **kwargs)
        LOGGER.debug(f'{f.__qualname__} took {timer.duration:.4f}s')
        return val

    return inner
