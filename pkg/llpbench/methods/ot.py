"""Optimal-transport pseudo-labelling: greedy exact OT and entropic Sinkhorn."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..utils.errors import DataValidationError
from ..utils.logging import increment_counter
from .dllp import LossGrad, bce_terms

logger = logging.getLogger(__name__)

SINKHORN_EPSILON = 0.1
SINKHORN_ITERS = 200
SINKHORN_TOL = 1e-6
_INTEGER_TOL = 1e-9
_LOG_FLOOR = 1e-12


class LabelMode(str, Enum):
    HARD = "hard"
    SOFT = "soft"


@dataclass(frozen=True)
class PseudoLabels:
    values: np.ndarray
    hard: bool
    iterations: int = 0
    converged: bool = True

    @property
    def positive_mass(self) -> float:
        return float(self.values.sum())


def _integer_count(label_sum: float, size: int) -> int:
    count = int(round(label_sum))
    if abs(label_sum - count) > _INTEGER_TOL:
        raise DataValidationError(f"greedy OT needs an integer label sum, got {label_sum}")
    if not 0 <= count <= size:
        raise DataValidationError(f"label sum {count} outside [0, {size}]")
    return count


def ot_greedy_pseudolabels(preds: np.ndarray, label_sum: float) -> PseudoLabels:
    """Label the ``y_B`` highest predictions 1; ties go to the lower index."""

    preds = np.asarray(preds, dtype=np.float64)
    count = _integer_count(label_sum, preds.size)
    order = np.lexsort((np.arange(preds.size), -preds))
    labels = np.zeros(preds.size)
    labels[order[:count]] = 1.0
    return PseudoLabels(labels, hard=True)


def _logsumexp(values: np.ndarray, axis: int) -> np.ndarray:
    return np.logaddexp.reduce(values, axis=axis)


def sinkhorn_plan(
    preds: np.ndarray,
    proportion: float,
    *,
    epsilon: float = SINKHORN_EPSILON,
    iters: int = SINKHORN_ITERS,
    tol: float = SINKHORN_TOL,
) -> tuple[np.ndarray, int, bool]:
    """Entropic transport plan between instances (mass ``1/n`` each) and classes (0, 1).

    Scaling runs in the log domain; each round fixes rows then columns, so the
    class marginals hold exactly and convergence is measured on the rows.
    """

    n = preds.size
    p = np.clip(preds, _LOG_FLOOR, 1.0 - _LOG_FLOOR)
    cost = np.stack([-np.log1p(-p), -np.log(p)], axis=1)
    log_kernel = -cost / epsilon
    log_a = np.full(n, -np.log(n))
    log_b = np.log([1.0 - proportion, proportion])
    log_u = np.zeros(n)
    log_v = np.zeros(2)
    converged = False
    rounds = 0
    for rounds in range(1, iters + 1):
        log_u = log_a - _logsumexp(log_kernel + log_v[None, :], axis=1)
        log_v = log_b - _logsumexp(log_kernel + log_u[:, None], axis=0)
        plan = np.exp(log_u[:, None] + log_kernel + log_v[None, :])
        if np.abs(plan.sum(axis=1) - np.exp(log_a)).sum() < tol:
            converged = True
            break
    plan = np.exp(log_u[:, None] + log_kernel + log_v[None, :])
    return plan, rounds, converged


def sinkhorn_pseudolabels(
    preds: np.ndarray,
    label_sum: float,
    *,
    epsilon: float = SINKHORN_EPSILON,
    iters: int = SINKHORN_ITERS,
    mode: LabelMode | str = LabelMode.SOFT,
    tol: float = SINKHORN_TOL,
) -> PseudoLabels:
    if epsilon <= 0:
        raise DataValidationError(f"epsilon must be > 0, got {epsilon}")
    mode = LabelMode(mode)
    preds = np.asarray(preds, dtype=np.float64)
    n = preds.size
    proportion = float(label_sum) / n
    if proportion <= 0.0 or proportion >= 1.0:
        fill = 1.0 if proportion >= 1.0 else 0.0
        return PseudoLabels(np.full(n, fill), hard=mode is LabelMode.HARD)
    plan, rounds, converged = sinkhorn_plan(preds, proportion, epsilon=epsilon, iters=iters, tol=tol)
    increment_counter("ot.sinkhorn_iterations", rounds)
    if not converged:
        logger.debug("ot.sinkhorn_not_converged", extra={"iterations": rounds, "size": n})
    if mode is LabelMode.SOFT:
        return PseudoLabels(plan[:, 1] * n, hard=False, iterations=rounds, converged=converged)
    hard = (plan[:, 1] > plan[:, 0]).astype(np.float64)
    return PseudoLabels(hard, hard=True, iterations=rounds, converged=converged)


def pseudo_label_bce(preds: np.ndarray, pseudo: PseudoLabels | np.ndarray) -> LossGrad:
    """Mean instance BCE against hard or soft pseudo-labels."""

    targets = pseudo.values if isinstance(pseudo, PseudoLabels) else np.asarray(pseudo, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if targets.shape != preds.shape:
        raise DataValidationError(
            f"pseudo-labels have shape {targets.shape}, predictions {preds.shape}"
        )
    loss, grad = bce_terms(targets, preds)
    return float(loss.mean()), grad / preds.size


__all__ = [
    "LabelMode",
    "PseudoLabels",
    "SINKHORN_EPSILON",
    "SINKHORN_ITERS",
    "SINKHORN_TOL",
    "ot_greedy_pseudolabels",
    "pseudo_label_bce",
    "sinkhorn_pseudolabels",
    "sinkhorn_plan",
]
