"""
Ordered parallel map over per-matrix work items.
"""

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from .constants import DEFAULT_WORKERS, PACKAGE_LOGGER_NAME

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.utils.parallel")

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return min(DEFAULT_WORKERS, os.cpu_count() or 1)


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], workers: int | None = None
) -> list[R]:
    """Apply ``fn`` to every item, returning results in input order.

    Runs inline when ``workers`` is 1; otherwise uses a thread pool (numpy
    releases the GIL inside LAPACK).
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug(f"Mapping {len(items)} items over {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
