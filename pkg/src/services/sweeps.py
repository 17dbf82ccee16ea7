"""
Parameter Sweeps - Quartet

Ordered parallel map for sweep rows. Worker count 0 means "size it from
the machine": physical cores, capped so that concurrent 2D grid solves
fit in available memory.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import psutil

from core.errors import DomainError, NumericalError

logger = logging.getLogger('quartet.sweeps')

T = TypeVar('T')
R = TypeVar('R')

# bytes per grid unknown held by one sector solve (matrix, LU factors, Lanczos basis)
BYTES_PER_UNKNOWN = 4096


def task_memory(grid_points: Optional[int]) -> int:
    """Rough peak bytes of one sector eigen-solve on an n x n grid."""
    if not grid_points:
        return 0
    quarter = (grid_points // 2 + 1) ** 2
    return quarter * BYTES_PER_UNKNOWN


def resolve_workers(workers: int = 0, grid_points: Optional[int] = None) -> int:
    if workers < 0:
        raise DomainError(f"workers must be >= 0, got {workers}", ['workers'])
    if workers > 0:
        return workers
    cores = psutil.cpu_count(logical=False) or os.cpu_count() or 1
    per_task = task_memory(grid_points)
    if per_task:
        available = psutil.virtual_memory().available
        cores = max(1, min(cores, available // per_task))
    logger.debug(f"sweep workers resolved to {cores}")
    return int(cores)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 0,
                 grid_points: Optional[int] = None) -> List[R]:
    """fn over items, results in input order."""
    items = list(items)
    if not items:
        return []
    count = min(resolve_workers(workers, grid_points), len(items))
    if count == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=count, thread_name_prefix='quartet-sweep') as pool:
        return list(pool.map(fn, items))


def guarded(fn: Callable[..., dict], *args, **kwargs) -> dict:
    """Run one row; a failure becomes {'error': ...} instead of aborting the sweep."""
    try:
        return fn(*args, **kwargs)
    except (DomainError, NumericalError) as e:
        logger.warning(f"sweep row failed: {e}")
        return {'error': f"{type(e).__name__}: {e}"}
