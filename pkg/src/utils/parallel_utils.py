"""
Work pool helper for independent per-member and per-s pipelines.
"""
import logging
from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

from .config_utils import activate_config, active_config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int = 1,
                 desc: Optional[str] = None, progress: bool = False) -> List[R]:
    """
    Map ``func`` over ``items`` preserving order.

    Args:
        func: Picklable callable (module-level function or functools.partial)
        items: Inputs
        workers: Process count; 1 runs in-process
        desc: Progress bar label
        progress: Show a tqdm bar

    Returns:
        Results in input order
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        iterator = tqdm(items, desc=desc, disable=not progress)
        return [func(item) for item in iterator]
    logger.info(f"Dispatching {len(items)} tasks to {workers} workers...")
    with Pool(workers, initializer=activate_config, initargs=(active_config(),)) as p:
        return list(tqdm(p.imap(func, items), total=len(items), desc=desc, disable=not progress))
