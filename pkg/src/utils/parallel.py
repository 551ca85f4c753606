"""Ordered worker pool honoring the LOCALNO_THREADS cap."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from .constants import THREADS_ENV_VAR

T = TypeVar("T")
R = TypeVar("R")

_logger = logging.getLogger(__name__)


def worker_count() -> int:
    """Number of workers, capped by the environment variable when set."""
    default = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV_VAR)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        _logger.warning("Ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
        return default
    return max(1, value)


def ordered_map(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Apply func to every item and return results in input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
