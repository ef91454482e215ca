# frustrated_diffusions/services/parallel.py
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from frustrated_diffusions.core.settings import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply `fn` to every item, possibly on worker threads; results keep input order."""
    items = list(items)
    workers = min(threads or settings.threads, len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    logger.debug("[Parallel] %d tasks on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


__all__ = ["map_ordered"]
