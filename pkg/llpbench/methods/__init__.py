"""LLP method interface and lazy registry."""
from __future__ import annotations

from importlib import import_module
from typing import TYPE_CHECKING, Any, Dict, FrozenSet, Mapping, Protocol, Tuple

import numpy as np

from ..stages.ingest import Task
from ..utils.errors import ConfigurationError

if TYPE_CHECKING:  # pragma: no cover - typing only
    from ..stages.bagging import BagCollection
    from ..stages.ingest import InstanceTable
    from ..stages.model import Head
    from .base import LossResult
    from .batch import BagBatch


class LLPMethod(Protocol):
    """Strategy interface for one bag-level training method."""

    name: str
    two_phase: bool
    needs_inputs: bool

    def supports(self, task: Task) -> bool:
        ...

    def head(self, task: Task) -> "Head":
        ...

    def prepare(self, table: "InstanceTable", coll: "BagCollection") -> None:
        ...

    def loss_and_grad(
        self,
        batch: "BagBatch",
        preds: np.ndarray,
        logits: np.ndarray,
        rng: np.random.Generator,
    ) -> "LossResult":
        ...


_METHODS: Dict[str, str] = {
    "dllp-bce": "llpbench.methods.strategies:DllpBce",
    "dllp-mse": "llpbench.methods.strategies:DllpMse",
    "dllp-mae": "llpbench.methods.strategies:DllpMae",
    "genbags": "llpbench.methods.strategies:GenBags",
    "easy-llp": "llpbench.methods.strategies:EasyLLP",
    "ot-llp": "llpbench.methods.strategies:OTLLP",
    "hard-erot-llp": "llpbench.methods.strategies:HardEROT",
    "soft-erot-llp": "llpbench.methods.strategies:SoftEROT",
    "sim-llp": "llpbench.methods.strategies:SimLLP",
    "mean-map": "llpbench.methods.strategies:MeanMap",
}

METHOD_IDS: Tuple[str, ...] = tuple(_METHODS)
REGRESSION_METHODS: FrozenSet[str] = frozenset({"dllp-mse", "dllp-mae", "genbags", "sim-llp"})


def method_names() -> Mapping[str, str]:
    """Return a mapping of method ids to their import paths."""

    return dict(_METHODS)


def methods_for(task: Task) -> Tuple[str, ...]:
    if Task(task) is Task.REGRESSION:
        return tuple(name for name in METHOD_IDS if name in REGRESSION_METHODS)
    return METHOD_IDS


def load_method(name: str, **options: Any) -> LLPMethod:
    """Instantiate a method strategy by id without eager imports."""

    key = name.lower()
    try:
        spec = _METHODS[key]
    except KeyError as exc:
        available = ", ".join(METHOD_IDS)
        raise ConfigurationError(f"Unknown method '{name}'. Available methods: {available}.") from exc
    module_name, attr = spec.split(":", 1)
    method_cls = getattr(import_module(module_name), attr)
    try:
        return method_cls(**options)
    except TypeError as exc:
        raise ConfigurationError(f"invalid options for method '{name}': {exc}") from exc


def require_supported(method: LLPMethod, task: Task) -> None:
    if not method.supports(task):
        raise ConfigurationError(f"method '{method.name}' does not apply to the {Task(task).value} task")


__all__ = [
    "LLPMethod",
    "METHOD_IDS",
    "REGRESSION_METHODS",
    "load_method",
    "method_names",
    "methods_for",
    "require_supported",
]
