"""Order-preserving thread pool helper for intra-stage parallelism."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Apply ``fn`` to every item, returning results in input order.

    Results never depend on ``workers``: each item must carry everything it
    needs (including its own derived seed).

    Args:
        fn: Pure function of one item
        items: Items to process
        workers: Thread count; 1 runs inline

    Returns:
        List of results aligned with ``items``
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
