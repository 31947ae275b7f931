"""Easy-LLP soft surrogate labels."""
from __future__ import annotations

import numpy as np

from .batch import BagBatch
from .dllp import LossGrad, bce_terms


def easyllp_surrogates(batch: BagBatch, prior: float) -> np.ndarray:
    """``s_i = |B| (z_B - p) + p`` for every member slot, left unclipped."""

    return batch.spread(batch.sizes * (batch.proportions - prior) + prior)


def easyllp_loss(batch: BagBatch, preds: np.ndarray, prior: float) -> LossGrad:
    """Mean over instances of ``s * l(y, 1) + (1 - s) * l(y, 0)``.

    Surrogates outside ``[0, 1]`` make individual terms negative; the estimator
    stays unbiased only without clipping.
    """

    loss, grad = bce_terms(easyllp_surrogates(batch, prior), preds)
    return float(loss.mean()), grad / batch.n


__all__ = ["easyllp_loss", "easyllp_surrogates"]
