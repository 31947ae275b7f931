"""SIM-LLP: bag loss plus a similarity penalty over sampled instance pairs."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..utils.errors import DataValidationError
from .batch import BagBatch
from .dllp import LossGrad, dllp_bce

SAMPLE_SIZE = 400
DEFAULT_LAMBDA = 1.0

BagLoss = Callable[[BagBatch, np.ndarray], LossGrad]


def similarity_term(
    x: np.ndarray, preds: np.ndarray
) -> LossGrad:
    """Mean over unordered pairs of ``exp(-|x_i - x_j|^2) (y_i - y_j)^2``."""

    n = preds.shape[0]
    if n < 2:
        return 0.0, np.zeros(n)
    norms = np.einsum("ij,ij->i", x, x)
    sq = np.maximum(norms[:, None] + norms[None, :] - 2.0 * (x @ x.T), 0.0)
    weight = np.exp(-sq)
    diff = preds[:, None] - preds[None, :]
    pairs = n * (n - 1) / 2.0
    value = float(np.sum(np.triu(weight * diff**2, k=1)) / pairs)
    grad = (2.0 / pairs) * np.sum(weight * diff, axis=1)
    return value, grad


def simllp_loss(
    batch: BagBatch,
    preds: np.ndarray,
    rng: np.random.Generator,
    *,
    lam: float = DEFAULT_LAMBDA,
    sample_size: int = SAMPLE_SIZE,
    bag_loss: BagLoss = dllp_bce,
    inputs: Optional[np.ndarray] = None,
) -> LossGrad:
    if lam < 0:
        raise DataValidationError(f"similarity weight must be >= 0, got {lam}")
    value, grad = bag_loss(batch, preds)
    if lam == 0:
        return value, grad
    x = inputs if inputs is not None else batch.x
    if x is None:
        raise DataValidationError("SIM-LLP needs the batch input vectors")
    count = min(sample_size, batch.n)
    sample = np.sort(rng.choice(batch.n, size=count, replace=False))
    sim_value, sim_grad = similarity_term(x[sample], preds[sample])
    grad = grad.copy()
    grad[sample] += lam * sim_grad
    return value + lam * sim_value, grad


__all__ = ["DEFAULT_LAMBDA", "SAMPLE_SIZE", "similarity_term", "simllp_loss"]
