"""Stage-scoped structured logging for the llpbench pipeline.

Every CLI command runs inside :func:`stage_scope`. The active
:class:`StageContext` carries a run id, user-supplied metadata (dataset id,
method, fold) and a set of counters that lower layers bump through
:func:`increment_counter` without needing a handle on the context.
"""
from __future__ import annotations

import logging
import threading
import uuid
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from time import perf_counter
from typing import Any, Dict, Iterator, Mapping, Optional

from .config import MAX_NAIVE_INSTANCES
from .errors import LLPBenchError

_LOG_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)-7s %(name)s %(message)s"
_DATE_FORMAT = "%Y-%m-%dT%H:%M:%S"
_NOISY_LOGGERS = ("matplotlib", "matplotlib.font_manager", "PIL")

# Failures the CLI reports as a structured envelope rather than a crash.
_EXPECTED_FAILURES = (LLPBenchError, ValueError, TypeError)

_active: ContextVar[Optional["StageContext"]] = ContextVar("llpbench_stage", default=None)


def configure_root(level: int = logging.INFO) -> None:
    logging.basicConfig(level=level, format=_LOG_FORMAT, datefmt=_DATE_FORMAT)
    for name in _NOISY_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))


@contextmanager
def scoped_timer(
    logger: logging.Logger, message: str, *, extra: Optional[Mapping[str, object]] = None
) -> Iterator[None]:
    """Log the wall time of the enclosed block at DEBUG."""

    began = perf_counter()
    try:
        yield
    finally:
        fields = dict(extra or {})
        fields["duration_s"] = perf_counter() - began
        logger.debug("%s", message, extra=fields)


class SafetyLimitExceeded(RuntimeError):
    """An input is larger than a quadratic-cost routine is allowed to see."""

    def __init__(self, kind: str, limit: int, attempted: int):
        self.kind = kind
        self.limit = limit
        self.attempted = attempted
        super().__init__(f"{kind} limit exceeded: attempted {attempted} > allowed {limit}")


@dataclass(slots=True)
class StageContext:
    name: str
    logger: logging.Logger
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    max_naive_instances: int = MAX_NAIVE_INSTANCES
    metadata: Dict[str, object] = field(default_factory=dict)
    counters: Dict[str, int] = field(default_factory=dict)
    started: float = field(default_factory=perf_counter)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def extra(self, **values: object) -> Dict[str, object]:
        """Fields attached to every record emitted for this stage."""

        return {"run_id": self.run_id, "stage": self.name, **self.metadata, **values}

    def log(
        self, level: int, message: str, *, extra: Optional[Mapping[str, object]] = None
    ) -> None:
        self.logger.log(level, message, extra=self.extra(**dict(extra or {})))

    def increment(self, counter: str, amount: int = 1) -> int:
        # Worker threads from the job runner share one context.
        with self._lock:
            total = self.counters[counter] = self.counters.get(counter, 0) + amount
        self.logger.debug("counter.%s", counter, extra=self.extra(counter=counter, value=total))
        return total

    def elapsed(self) -> float:
        return perf_counter() - self.started

    def snapshot(self) -> Dict[str, Any]:
        """Plain-data view of the stage for audit entries."""

        with self._lock:
            counters = dict(self.counters)
        view: Dict[str, Any] = {"run_id": self.run_id, "stage": self.name}
        if self.metadata:
            view["context"] = dict(self.metadata)
        if counters:
            view["counters"] = counters
        return view


@contextmanager
def stage_scope(
    name: str,
    *,
    logger: Optional[logging.Logger] = None,
    extra: Optional[Mapping[str, object]] = None,
    max_naive_instances: Optional[int] = None,
) -> Iterator[StageContext]:
    """Run the enclosed block as the named pipeline stage.

    Emits ``stage.start`` and ``stage.finish`` at INFO. Expected failures
    (llpbench errors and bad-value errors) are noted at DEBUG as
    ``stage.validation_error``; anything else is logged with its traceback as
    ``stage.error``. The exception always propagates.
    """

    context = StageContext(
        name=name,
        logger=logger or logging.getLogger("llpbench.stage"),
        metadata=dict(extra or {}),
    )
    if max_naive_instances is not None:
        context.max_naive_instances = max_naive_instances
    token = _active.set(context)
    context.log(logging.INFO, "stage.start")
    try:
        yield context
    except _EXPECTED_FAILURES as exc:
        context.log(
            logging.DEBUG,
            "stage.validation_error",
            extra={"error_type": type(exc).__name__, "error_message": str(exc)},
        )
        raise
    except Exception:
        context.logger.exception("stage.error", extra=context.extra())
        raise
    finally:
        context.log(
            logging.INFO,
            "stage.finish",
            extra={"duration_s": context.elapsed(), "counters": dict(context.counters)},
        )
        _active.reset(token)


def current_stage() -> Optional[StageContext]:
    return _active.get()


def increment_counter(name: str, amount: int = 1) -> None:
    """Bump a counter on the active stage; a no-op outside any stage."""

    context = _active.get()
    if context is not None:
        context.increment(name, amount)


def enforce_instance_limit(size: int, *, counter: str = "naive_instances") -> None:
    """Refuse to hand more than the configured instance count to an O(n^2) routine.

    Accepted sizes are added to ``counter`` on the active stage.
    """

    context = _active.get()
    if context is None:
        if size > MAX_NAIVE_INSTANCES:
            raise SafetyLimitExceeded(counter, MAX_NAIVE_INSTANCES, size)
        return
    limit = context.max_naive_instances
    if size > limit:
        context.log(
            logging.WARNING,
            "limit.instances_exceeded",
            extra={"attempted": size, "limit": limit, "counter": counter},
        )
        raise SafetyLimitExceeded(counter, limit, size)
    context.increment(counter, size)


__all__ = [
    "SafetyLimitExceeded",
    "StageContext",
    "configure_root",
    "current_stage",
    "enforce_instance_limit",
    "increment_counter",
    "scoped_timer",
    "stage_scope",
]
