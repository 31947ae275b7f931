"""Shared plumbing for LLP method strategies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, FrozenSet, Optional

import numpy as np

from ..stages.bagging import BagCollection
from ..stages.ingest import InstanceTable, Task
from ..stages.model import Head
from .batch import BagBatch


@dataclass(frozen=True)
class LossResult:
    """Loss value with the upstream gradient w.r.t. predictions or logits."""

    value: float
    d_pred: Optional[np.ndarray] = None
    d_logit: Optional[np.ndarray] = None


class BaseMethod:
    name: ClassVar[str] = ""
    tasks: ClassVar[FrozenSet[Task]] = frozenset({Task.BINARY})
    two_phase: ClassVar[bool] = False
    needs_inputs: ClassVar[bool] = False

    def supports(self, task: Task) -> bool:
        return task in self.tasks

    def head(self, task: Task) -> Head:
        return Head.SIGMOID if task is Task.BINARY else Head.IDENTITY

    def prepare(self, table: InstanceTable, coll: BagCollection) -> None:
        """Hook run once per training split before the first step."""

    def loss_and_grad(
        self,
        batch: BagBatch,
        preds: np.ndarray,
        logits: np.ndarray,
        rng: np.random.Generator,
    ) -> LossResult:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"


__all__ = ["BaseMethod", "LossResult"]
