# standard library
from typing import Callable, List, Sequence
import multiprocessing
import random
import logging

# third-party libraries
from mpmath import mp


logger = logging.getLogger(__name__)


def _call_at_precision(task):
    func, dps, item = task
    mp.dps = dps
    return func(item)


def map_samples(func: Callable, items: Sequence, workers: int = 1, seed: int = 0) -> List:
    """
    Evaluates func over items, in a process pool when workers > 1.
    Items are dispatched in a shuffled order (fixed by `seed`) so that expensive
    neighbours spread over the workers; results come back in input order.
    `func` has to be a module-level function.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    tasks = [(func, mp.dps, items[i]) for i in order]
    logger.debug(f'dispatching {len(tasks)} samples to {workers} workers')
    with multiprocessing.Pool(processes=workers) as pool:
        shuffled = pool.map(_call_at_precision, tasks)

    results = [None]*len(items)
    for i, res in zip(order, shuffled):
        results[i] = res
    return results
