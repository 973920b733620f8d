# utils/worker_pool.py
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def run_tasks(task: Callable[[T], R], items: Sequence[T], jobs: int = 1,
              callback: Optional[Callable[[R], None]] = None,
              progress: bool = False, desc: str = "runs") -> List[R]:
    """
    Apply ``task`` to every item, in worker processes when jobs > 1.

    Results come back in item order whatever the completion order. ``task``
    must be a module-level function when jobs > 1 (it is pickled).
    """
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")
    results: List[Optional[R]] = [None] * len(items)
    bar = tqdm(total=len(items), desc=desc, disable=not progress, leave=False)
    try:
        if jobs == 1 or len(items) <= 1:
            for i, item in enumerate(items):
                results[i] = task(item)
                _notify(callback, results[i])
                bar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(task, item): i for i, item in enumerate(items)}
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    _notify(callback, results[futures[future]])
                    bar.update(1)
    finally:
        bar.close()
    return results


def _notify(callback, result) -> None:
    if callback:
        try:
            callback(result)
        except Exception:
            pass


def chunked(items: Iterable[T], size: int) -> List[List[T]]:
    batch: List[T] = []
    out: List[List[T]] = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            out.append(batch)
            batch = []
    if batch:
        out.append(batch)
    return out
