"""DLLP losses: BCE on bag proportions, MSE and MAE on bag label sums."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from .batch import BagBatch

PROB_EPS = 1e-7

LossGrad = Tuple[float, np.ndarray]


def clipped(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values clipped into ``[eps, 1 - eps]`` plus a mask of untouched entries."""

    inside = (values > PROB_EPS) & (values < 1.0 - PROB_EPS)
    return np.clip(values, PROB_EPS, 1.0 - PROB_EPS), inside


def bce_terms(target: np.ndarray, prob: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise ``-[t log p + (1-t) log(1-p)]`` and its derivative in ``p``."""

    safe, inside = clipped(prob)
    loss = -(target * np.log(safe) + (1.0 - target) * np.log1p(-safe))
    grad = (-(target / safe) + (1.0 - target) / (1.0 - safe)) * inside
    return loss, grad


def dllp_bce(batch: BagBatch, preds: np.ndarray) -> LossGrad:
    z_hat = batch.bag_means(preds)
    loss, d_zhat = bce_terms(batch.proportions, z_hat)
    return float(loss.sum()), batch.spread(d_zhat / batch.sizes)


def dllp_mse(batch: BagBatch, preds: np.ndarray) -> LossGrad:
    residual = batch.bag_sums(preds) - batch.label_sums
    return float(np.sum(residual**2)), batch.spread(2.0 * residual)


def dllp_mae(batch: BagBatch, preds: np.ndarray) -> LossGrad:
    residual = batch.bag_sums(preds) - batch.label_sums
    return float(np.sum(np.abs(residual))), batch.spread(np.sign(residual))


__all__ = ["PROB_EPS", "bce_terms", "clipped", "dllp_bce", "dllp_mae", "dllp_mse"]
