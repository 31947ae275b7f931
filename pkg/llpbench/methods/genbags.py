"""Generalized bags: Gaussian combinations of per-bag proportion residuals."""
from __future__ import annotations

import numpy as np

from ..utils.errors import DataValidationError
from .batch import BagBatch
from .dllp import LossGrad

BLOCK_SIZE = 4
DRAWS_PER_BLOCK = 60
BAGS_PER_BATCH = 8

# Unit diagonal, -1/3 off the diagonal; eigenvalues {4/3, 4/3, 4/3, 0}.
GENBAGS_COV = np.full((BLOCK_SIZE, BLOCK_SIZE), -1.0 / 3.0) + np.eye(BLOCK_SIZE) * (4.0 / 3.0)


def sample_weights(rng: np.random.Generator, blocks: int, draws: int = DRAWS_PER_BLOCK) -> np.ndarray:
    """``(blocks, draws, 4)`` samples of ``N(0, GENBAGS_COV)``.

    A centred standard normal scaled by ``sqrt(4/3)`` has exactly this covariance,
    so every draw sums to zero.
    """

    raw = rng.standard_normal((blocks, draws, BLOCK_SIZE))
    return np.sqrt(4.0 / 3.0) * (raw - raw.mean(axis=-1, keepdims=True))


def genbags_loss_with_weights(batch: BagBatch, preds: np.ndarray, weights: np.ndarray) -> LossGrad:
    """Mean squared generalized residual for a fixed weight draw.

    Block ``b`` combines bags ``4b .. 4b+3``; bags past the last full block are unused.
    """

    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 3 or weights.shape[2] != BLOCK_SIZE:
        raise DataValidationError("weights must have shape (blocks, draws, 4)")
    blocks = weights.shape[0]
    if blocks * BLOCK_SIZE > batch.k:
        raise DataValidationError(f"{blocks} blocks need {blocks * BLOCK_SIZE} bags, batch has {batch.k}")
    if blocks == 0:
        return 0.0, np.zeros(batch.n)
    used = blocks * BLOCK_SIZE
    delta = (batch.proportions - batch.bag_means(preds))[:used].reshape(blocks, BLOCK_SIZE)
    residual = np.einsum("bdj,bj->bd", weights, delta)
    total = residual.size
    d_delta = (2.0 / total) * np.einsum("bd,bdj->bj", residual, weights)
    d_zhat = np.zeros(batch.k)
    d_zhat[:used] = -d_delta.reshape(-1)
    return float(np.sum(residual**2) / total), batch.spread(d_zhat / batch.sizes)


def genbags_loss(
    batch: BagBatch,
    preds: np.ndarray,
    rng: np.random.Generator,
    *,
    strict: bool = True,
    draws: int = DRAWS_PER_BLOCK,
) -> LossGrad:
    """Two blocks of four bags with 60 draws each (120 generalized bags).

    With ``strict=False`` any batch size is accepted: blocks are formed from however
    many bags are present and a partial trailing block is dropped.
    """

    if strict and batch.k != BAGS_PER_BATCH:
        raise DataValidationError(f"genbags needs {BAGS_PER_BATCH} bags per batch, got {batch.k}")
    blocks = batch.k // BLOCK_SIZE
    return genbags_loss_with_weights(batch, preds, sample_weights(rng, blocks, draws))


__all__ = [
    "BAGS_PER_BATCH",
    "BLOCK_SIZE",
    "DRAWS_PER_BLOCK",
    "GENBAGS_COV",
    "genbags_loss",
    "genbags_loss_with_weights",
    "sample_weights",
]
