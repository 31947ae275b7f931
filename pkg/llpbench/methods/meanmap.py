"""Mean-Map in two steps: bag-weighted mean statistic, then likelihood fitting.

The linear ``theta^T x`` of the exponential-family model is lifted to the network
logit ``f(x)``, so the mean-map inner product becomes ``sum_B z_B sum_{i in B} f(x_i)``.
The estimated mean embedding ``mu`` also enters the loss through its moment
condition: at the likelihood optimum the model's positive-class mean embedding
``(1/n) sum_i sigma(f_i) x_i`` equals ``mu``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Final

import numpy as np

from ..stages.bagging import BagCollection
from ..stages.ingest import InstanceTable
from ..stages.model import input_dim, multihot_batch, sigmoid
from ..utils.errors import DataValidationError, EmptyDataError
from .batch import BagBatch
from .dllp import LossGrad

MOMENT_WEIGHT: Final[float] = 1.0


@dataclass(frozen=True)
class MeanMapStatistic:
    bag_weights: np.ndarray
    mu: np.ndarray
    instances: int


def meanmap_mu(coll: BagCollection, table: InstanceTable) -> MeanMapStatistic:
    """Per-bag weights ``z_B`` and ``mu = (1/N) sum_B z_B sum_{i in B} x_i`` in multihot space."""

    if not len(coll):
        raise EmptyDataError("mean-map statistic needs at least one bag")
    weights = coll.proportions
    if np.any((weights < 0) | (weights > 1)):
        raise DataValidationError("mean-map needs binary labels")
    mu = np.zeros(input_dim(table))
    for weight, bag in zip(weights, coll.bags):
        mu += weight * multihot_batch(table, bag.members).sum(axis=0)
    total = int(coll.sizes.sum())
    return MeanMapStatistic(bag_weights=weights, mu=mu / total, instances=total)


def meanmap_loss(
    batch: BagBatch,
    logits: np.ndarray,
    mu_hat: MeanMapStatistic,
    *,
    moment_weight: float = MOMENT_WEIGHT,
) -> LossGrad:
    """Mean-Map minibatch loss; the gradient is w.r.t. logits.

    ``(1/n)[sum softplus(f_i) - sum_B w_B sum_{i in B} f_i] + c * ||m - mu||^2`` where
    ``w_B`` is looked up in ``mu_hat.bag_weights`` by ``batch.ids``,
    ``m = (1/n) sum_i sigma(f_i) x_i`` and ``c`` is *moment_weight*.
    """

    ids = batch.ids
    if ids.size and (ids.min() < 0 or ids.max() >= mu_hat.bag_weights.size):
        raise DataValidationError(
            f"batch bag ids outside the {mu_hat.bag_weights.size} bags of the mean-map statistic"
        )
    if moment_weight < 0:
        raise DataValidationError(f"moment weight must be >= 0, got {moment_weight}")
    n = batch.n
    per_slot = batch.spread(mu_hat.bag_weights[ids])
    probs = sigmoid(logits)
    value = float((np.sum(np.logaddexp(0.0, logits)) - np.sum(per_slot * logits)) / n)
    grad = (probs - per_slot) / n
    if moment_weight:
        if batch.x is None or batch.x.shape[1] != mu_hat.mu.size:
            raise DataValidationError("mean-map moment term needs batch inputs matching the statistic")
        gap = probs @ batch.x / n - mu_hat.mu
        value += moment_weight * float(gap @ gap)
        grad = grad + moment_weight * 2.0 * (batch.x @ gap) * probs * (1.0 - probs) / n
    return value, grad


__all__ = ["MOMENT_WEIGHT", "MeanMapStatistic", "meanmap_loss", "meanmap_mu"]
