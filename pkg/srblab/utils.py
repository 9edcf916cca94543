"""Atomic file writes and log based progress for long parameter loops."""
from contextlib import contextmanager
import logging
import os
from pathlib import Path
import time

logger = logging.getLogger(__name__)


@contextmanager
def atomic_path(path):
    """Yield a temporary path next to `path`, renamed onto it if the block succeeds."""
    path = Path(path)
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        yield tmp_path
        os.replace(tmp_path, path)
    except OSError as err:
        raise OSError(f"Could not write {path}: {err}") from err
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


class LogProgress:
    """Iterate over parameter points, logging a progress line every 1/`updates` of them.

    Args:
        logger: where the lines go.
        items: sized iterable, e.g. parameter values or pending futures.
        updates: number of progress lines over the whole loop.
        name: prefix of every line.
        level: logging level.
    """
    def __init__(self, logger, items, updates=5, name="Progress", level=logging.INFO):
        self.items = items
        self.total = len(items)
        self.every = max(1, self.total // updates)
        self.name = name
        self.logger = logger
        self.level = level

    def __iter__(self):
        begin = time.time()
        for done, item in enumerate(self.items, 1):
            yield item
            if done % self.every == 0 or done == self.total:
                self._log(done, time.time() - begin)

    def _log(self, done, elapsed):
        rate = done / elapsed if elapsed > 0 else float("inf")
        pace = f"{1 / rate:.1f} sec/point" if rate < 1 else f"{rate:.1f} points/sec"
        self.logger.log(self.level, "%s | %d/%d | %s", self.name, done, self.total, pace)


def colorize(text, color):
    """Wrap text in an ANSI color code."""
    return f"\033[{color}m{text}\033[0m"


def bold(text):
    return colorize(text, "1")
