"""Fan-out of independent work items with results in submission order."""
from __future__ import annotations

import contextvars
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Generic, List, Sequence, Tuple, TypeVar

from ..utils.logging import increment_counter

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class WorkItem(Generic[T]):
    """One ``(dataset, method, fold)``-style unit of work."""

    key: Tuple[str, ...]
    run: Callable[[], T]


def run_jobs(items: Sequence[WorkItem[T]], jobs: int = 1) -> List[T]:
    """Run *items* on up to *jobs* threads; the first failure is re-raised after all finish."""

    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or len(items) <= 1:
        results = [item.run() for item in items]
        increment_counter("jobs.completed", len(results))
        return results
    with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix="llpbench") as pool:
        # Each worker runs in a copy of the caller's context so stage counters stay attached.
        futures = [pool.submit(contextvars.copy_context().run, item.run) for item in items]
        outcomes: List[T] = []
        failure: BaseException | None = None
        for item, future in zip(items, futures):
            try:
                outcomes.append(future.result())
            except Exception as exc:
                logger.error("jobs.item_failed", extra={"key": "/".join(item.key), "error": str(exc)})
                if failure is None:
                    failure = exc
    if failure is not None:
        raise failure
    increment_counter("jobs.completed", len(outcomes))
    return outcomes


__all__ = ["WorkItem", "run_jobs"]
