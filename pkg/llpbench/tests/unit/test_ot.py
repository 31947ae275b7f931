from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from llpbench.methods.dllp import bce_terms
from llpbench.methods.ot import (
    LabelMode,
    PseudoLabels,
    ot_greedy_pseudolabels,
    pseudo_label_bce,
    sinkhorn_plan,
    sinkhorn_pseudolabels,
)
from llpbench.utils.errors import DataValidationError


def test_greedy_picks_highest_predictions() -> None:
    labels = ot_greedy_pseudolabels(np.array([0.1, 0.9, 0.5, 0.9]), 2)

    assert labels.values.tolist() == [0, 1, 0, 1]
    assert labels.hard


def test_greedy_breaks_ties_by_index() -> None:
    assert ot_greedy_pseudolabels(np.array([0.5, 0.5, 0.5]), 1).values.tolist() == [1, 0, 0]


def test_greedy_extremes() -> None:
    preds = np.array([0.3, 0.7])

    assert ot_greedy_pseudolabels(preds, 0).values.tolist() == [0, 0]
    assert ot_greedy_pseudolabels(preds, 2).values.tolist() == [1, 1]


def test_greedy_rejects_bad_label_sums() -> None:
    with pytest.raises(DataValidationError):
        ot_greedy_pseudolabels(np.array([0.3, 0.7]), 1.5)
    with pytest.raises(DataValidationError):
        ot_greedy_pseudolabels(np.array([0.3, 0.7]), 3)


@pytest.mark.parametrize("seed", range(10))
def test_greedy_matches_exhaustive_search(seed: int) -> None:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    preds = rng.uniform(0.01, 0.99, size=n)
    count = int(rng.integers(0, n + 1))

    def cost(labels: np.ndarray) -> float:
        return float(bce_terms(labels, preds)[0].sum())

    best = min(
        cost(np.isin(np.arange(n), chosen).astype(float)) for chosen in combinations(range(n), count)
    )
    greedy = ot_greedy_pseudolabels(preds, count)

    assert greedy.positive_mass == count
    assert cost(greedy.values) == pytest.approx(best, abs=1e-9)


def test_sinkhorn_plan_marginals() -> None:
    preds = np.array([0.2, 0.4, 0.6, 0.8, 0.5])

    plan, _, converged = sinkhorn_plan(preds, 0.4, epsilon=0.1, iters=2000)

    assert converged
    assert np.allclose(plan.sum(axis=1), 1 / 5, atol=1e-6)
    assert np.allclose(plan.sum(axis=0), [0.6, 0.4], atol=1e-9)


def test_sinkhorn_soft_labels_carry_bag_count() -> None:
    preds = np.array([0.2, 0.4, 0.6, 0.8, 0.5])

    soft = sinkhorn_pseudolabels(preds, 2, iters=2000)

    assert not soft.hard
    assert soft.positive_mass == pytest.approx(2.0, abs=1e-6)
    assert np.all(np.diff(soft.values[[0, 1, 4, 2, 3]]) > 0)


def test_sinkhorn_approaches_greedy_for_small_epsilon() -> None:
    preds = np.array([0.1, 0.3, 0.6, 0.9])

    hard = sinkhorn_pseudolabels(preds, 2, epsilon=1e-3, iters=20000, mode=LabelMode.HARD)
    soft = sinkhorn_pseudolabels(preds, 2, epsilon=1e-3, iters=20000)

    assert hard.values.tolist() == [0, 0, 1, 1]
    assert soft.values.tolist() == pytest.approx([0, 0, 1, 1], abs=1e-3)
    assert hard.values.tolist() == ot_greedy_pseudolabels(preds, 2).values.tolist()


def test_sinkhorn_degenerate_proportions() -> None:
    preds = np.array([0.2, 0.7, 0.4])

    assert sinkhorn_pseudolabels(preds, 0).values.tolist() == [0, 0, 0]
    assert sinkhorn_pseudolabels(preds, 3, mode="hard").values.tolist() == [1, 1, 1]
    with pytest.raises(DataValidationError):
        sinkhorn_pseudolabels(preds, 1, epsilon=0.0)


def test_pseudo_label_bce() -> None:
    value, grad = pseudo_label_bce(np.array([0.5, 0.5]), PseudoLabels(np.array([1.0, 0.0]), hard=True))

    assert value == pytest.approx(np.log(2))
    assert grad.tolist() == pytest.approx([-1.0, 1.0])
    with pytest.raises(DataValidationError):
        pseudo_label_bce(np.array([0.5]), np.array([1.0, 0.0]))
