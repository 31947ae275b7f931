"""Concrete method strategies wiring each loss into the training loop."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from ..stages.bagging import BagCollection
from ..stages.hardness import label_bias
from ..stages.ingest import InstanceTable, Task
from .base import BaseMethod, LossResult
from .batch import BagBatch
from .dllp import dllp_bce, dllp_mae, dllp_mse
from .easyllp import easyllp_loss
from .genbags import genbags_loss
from .meanmap import MOMENT_WEIGHT, MeanMapStatistic, meanmap_loss, meanmap_mu
from .ot import (
    SINKHORN_EPSILON,
    SINKHORN_ITERS,
    LabelMode,
    PseudoLabels,
    ot_greedy_pseudolabels,
    sinkhorn_pseudolabels,
)
from .simllp import DEFAULT_LAMBDA, SAMPLE_SIZE, simllp_loss

logger = logging.getLogger(__name__)

_ANY_TASK = frozenset({Task.BINARY, Task.REGRESSION})


class DllpBce(BaseMethod):
    name = "dllp-bce"

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        value, grad = dllp_bce(batch, preds)
        return LossResult(value, d_pred=grad)


class DllpMse(BaseMethod):
    name = "dllp-mse"
    tasks = _ANY_TASK

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        value, grad = dllp_mse(batch, preds)
        return LossResult(value, d_pred=grad)


class DllpMae(BaseMethod):
    name = "dllp-mae"
    tasks = _ANY_TASK

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        value, grad = dllp_mae(batch, preds)
        return LossResult(value, d_pred=grad)


class GenBags(BaseMethod):
    name = "genbags"
    tasks = _ANY_TASK

    def __init__(self, *, strict: bool = False) -> None:
        self.strict = strict

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        value, grad = genbags_loss(batch, preds, rng, strict=self.strict)
        return LossResult(value, d_pred=grad)


class EasyLLP(BaseMethod):
    name = "easy-llp"

    def __init__(self, *, prior: Optional[float] = None) -> None:
        self.prior = prior

    def prepare(self, table: InstanceTable, coll: BagCollection) -> None:
        self.prior = label_bias(coll)
        logger.debug("methods.easyllp_prior", extra={"prior": self.prior})

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        if self.prior is None:
            raise RuntimeError("easy-llp prior not prepared")
        value, grad = easyllp_loss(batch, preds, self.prior)
        return LossResult(value, d_pred=grad)


class SimLLP(BaseMethod):
    name = "sim-llp"
    tasks = _ANY_TASK
    needs_inputs = True

    def __init__(self, *, lam: float = DEFAULT_LAMBDA, sample_size: int = SAMPLE_SIZE) -> None:
        self.lam = lam
        self.sample_size = sample_size
        self.task = Task.BINARY

    def prepare(self, table: InstanceTable, coll: BagCollection) -> None:
        self.task = table.task

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        bag_loss = dllp_bce if self.task is Task.BINARY else dllp_mse
        value, grad = simllp_loss(
            batch, preds, rng, lam=self.lam, sample_size=self.sample_size, bag_loss=bag_loss
        )
        return LossResult(value, d_pred=grad)


class MeanMap(BaseMethod):
    name = "mean-map"
    needs_inputs = True

    def __init__(self, *, moment_weight: float = MOMENT_WEIGHT) -> None:
        self.moment_weight = moment_weight
        self.statistic: Optional[MeanMapStatistic] = None

    def prepare(self, table: InstanceTable, coll: BagCollection) -> None:
        self.statistic = meanmap_mu(coll, table)
        logger.debug(
            "methods.meanmap_statistic",
            extra={"instances": self.statistic.instances, "mu_norm": float(np.linalg.norm(self.statistic.mu))},
        )

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        if self.statistic is None:
            raise RuntimeError("mean-map statistic not prepared")
        value, grad = meanmap_loss(batch, logits, self.statistic, moment_weight=self.moment_weight)
        return LossResult(value, d_logit=grad)


class PseudoLabelMethod(BaseMethod):
    """DLLP-BCE pretraining followed by rounds of pseudo-label fitting."""

    two_phase = True

    def loss_and_grad(self, batch, preds, logits, rng) -> LossResult:
        value, grad = dllp_bce(batch, preds)
        return LossResult(value, d_pred=grad)

    def pseudo_labels(self, preds: np.ndarray, label_sum: float) -> PseudoLabels:
        raise NotImplementedError


class OTLLP(PseudoLabelMethod):
    name = "ot-llp"

    def pseudo_labels(self, preds: np.ndarray, label_sum: float) -> PseudoLabels:
        return ot_greedy_pseudolabels(preds, label_sum)


class _EntropicOT(PseudoLabelMethod):
    mode = LabelMode.SOFT

    def __init__(self, *, epsilon: float = SINKHORN_EPSILON, iters: int = SINKHORN_ITERS) -> None:
        self.epsilon = epsilon
        self.iters = iters

    def pseudo_labels(self, preds: np.ndarray, label_sum: float) -> PseudoLabels:
        return sinkhorn_pseudolabels(
            preds, label_sum, epsilon=self.epsilon, iters=self.iters, mode=self.mode
        )


class HardEROT(_EntropicOT):
    name = "hard-erot-llp"
    mode = LabelMode.HARD


class SoftEROT(_EntropicOT):
    name = "soft-erot-llp"
    mode = LabelMode.SOFT


__all__ = [
    "DllpBce",
    "DllpMae",
    "DllpMse",
    "EasyLLP",
    "GenBags",
    "HardEROT",
    "MeanMap",
    "OTLLP",
    "PseudoLabelMethod",
    "SimLLP",
    "SoftEROT",
]
