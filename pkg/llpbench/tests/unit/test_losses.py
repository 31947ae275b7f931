"""Bag-level losses: worked examples plus finite-difference gradient checks."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable, Tuple

import numpy as np
import pytest

from llpbench.methods.batch import BagBatch
from llpbench.methods.dllp import dllp_bce, dllp_mae, dllp_mse
from llpbench.methods.easyllp import easyllp_loss, easyllp_surrogates
from llpbench.methods.genbags import (
    GENBAGS_COV,
    genbags_loss,
    genbags_loss_with_weights,
    sample_weights,
)
from llpbench.methods.meanmap import MeanMapStatistic, meanmap_loss, meanmap_mu
from llpbench.methods.simllp import similarity_term, simllp_loss
from llpbench.stages.bagging import GroupingKey, group_by_key
from llpbench.stages.model import multihot_batch, sigmoid
from llpbench.tests._tables import nine_row_table
from llpbench.utils.errors import DataValidationError, EmptyDataError

LossFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def _check_gradient(fn: LossFn, point: np.ndarray, eps: float = 1e-6) -> None:
    _, analytic = fn(point)
    for i in range(point.size):
        shifted = point.copy()
        shifted[i] += eps
        upper, _ = fn(shifted)
        shifted[i] -= 2 * eps
        lower, _ = fn(shifted)
        assert analytic[i] == pytest.approx((upper - lower) / (2 * eps), rel=1e-5, abs=1e-7)


def _batch(sizes, label_sums, x=None) -> BagBatch:
    return BagBatch.from_arrays(sizes, label_sums, x)


def _preds(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.05, 0.95, size=n)


def test_batch_helpers() -> None:
    batch = _batch([2, 3], [1.0, 0.0])

    assert batch.k == 2 and batch.n == 5
    assert batch.owner.tolist() == [0, 0, 1, 1, 1]
    assert batch.bag_means(np.array([1.0, 0.0, 0.3, 0.3, 0.3])).tolist() == pytest.approx([0.5, 0.3])
    assert batch.spread(np.array([7.0, 9.0])).tolist() == [7, 7, 9, 9, 9]
    with pytest.raises(EmptyDataError):
        _batch([], [])
    with pytest.raises(EmptyDataError):
        _batch([2, 0], [1, 0])


def test_dllp_bce_examples() -> None:
    value, grad = dllp_bce(_batch([2], [1.0]), np.array([0.5, 0.5]))
    assert value == pytest.approx(math.log(2))
    assert np.allclose(grad, 0.0)

    value, _ = dllp_bce(_batch([2], [2.0]), np.array([0.8, 0.6]))
    assert value == pytest.approx(-math.log(0.7))


def test_dllp_mse_and_mae_examples() -> None:
    batch = _batch([2], [1.0])
    preds = np.array([0.2, 0.3])

    mse, mse_grad = dllp_mse(batch, preds)
    mae, mae_grad = dllp_mae(batch, preds)

    assert mse == pytest.approx(0.25)
    assert mse_grad.tolist() == pytest.approx([-1.0, -1.0])
    assert mae == pytest.approx(0.5)
    assert mae_grad.tolist() == [-1.0, -1.0]


def test_dllp_losses_are_zero_on_exact_proportions() -> None:
    batch = _batch([2, 2], [1.0, 2.0])
    preds = np.array([0.25, 0.75, 1.0, 1.0])

    assert dllp_mse(batch, preds)[0] == pytest.approx(0.0)
    assert dllp_mae(batch, preds)[0] == pytest.approx(0.0)


@pytest.mark.parametrize("loss", [dllp_bce, dllp_mse, dllp_mae])
def test_dllp_gradients(loss) -> None:
    batch = _batch([3, 2, 4], [1.0, 2.0, 0.0])

    _check_gradient(lambda p: loss(batch, p), _preds(batch.n))


def test_genbags_weights_sum_to_zero_with_expected_covariance() -> None:
    weights = sample_weights(np.random.default_rng(0), 1, 40000)[0]

    assert np.allclose(weights.sum(axis=1), 0.0)
    assert np.allclose(np.cov(weights, rowvar=False), GENBAGS_COV, atol=0.05)


def test_genbags_hand_example() -> None:
    batch = _batch([1, 1, 1, 1], [1.0, 0.0, 0.0, 0.0])
    preds = np.array([0.5, 0.0, 0.0, 0.0])
    weights = np.array([[[1.0, -1.0, 0.0, 0.0]]])

    value, _ = genbags_loss_with_weights(batch, preds, weights)

    assert value == pytest.approx(0.25)


def test_genbags_ignores_uniform_residual() -> None:
    batch = _batch([2] * 8, [1.0] * 8)
    preds = np.full(16, 0.2)

    value, grad = genbags_loss(batch, preds, np.random.default_rng(3))

    assert value == pytest.approx(0.0, abs=1e-20)
    assert np.allclose(grad, 0.0)


def test_genbags_batch_size_rules() -> None:
    rng = np.random.default_rng(0)

    with pytest.raises(DataValidationError):
        genbags_loss(_batch([1] * 5, [0.0] * 5), np.zeros(5), rng)
    value, grad = genbags_loss(_batch([1] * 5, [1.0, 0, 0, 0, 1.0]), np.full(5, 0.5), rng, strict=False)
    assert value > 0
    assert grad[4] == 0.0
    value, grad = genbags_loss(_batch([1] * 3, [0.0] * 3), np.zeros(3), rng, strict=False)
    assert value == 0.0
    assert not np.any(grad)


def test_genbags_gradient_for_fixed_weights() -> None:
    batch = _batch([2, 1, 3, 2, 1, 1, 2, 2], [1, 0, 2, 1, 1, 0, 2, 0])
    weights = sample_weights(np.random.default_rng(5), 2, 6)

    _check_gradient(lambda p: genbags_loss_with_weights(batch, p, weights), _preds(batch.n, 1))


@pytest.mark.parametrize("seed", range(5))
def test_genbags_loss_ignores_block_order(seed: int) -> None:
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 5, size=8)
    label_sums = np.array([rng.integers(0, size + 1) for size in sizes], dtype=np.float64)
    preds = _preds(int(sizes.sum()), seed)
    weights = sample_weights(rng, 2, 6)
    # Second block of four bags first, with the weight blocks swapped to match.
    order = [4, 5, 6, 7, 0, 1, 2, 3]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    slots = np.concatenate([np.arange(starts[b], starts[b + 1]) for b in order])

    value, grad = genbags_loss_with_weights(_batch(sizes, label_sums), preds, weights)
    swapped_value, swapped_grad = genbags_loss_with_weights(
        _batch(sizes[order], label_sums[order]), preds[slots], weights[::-1]
    )

    assert swapped_value == pytest.approx(value, rel=1e-12)
    assert np.allclose(swapped_grad, grad[slots], rtol=1e-12, atol=1e-15)


def test_easyllp_surrogates_are_unclipped() -> None:
    batch = _batch([2, 2], [2.0, 0.0])

    surrogates = easyllp_surrogates(batch, 0.5)

    assert surrogates.tolist() == pytest.approx([1.5, 1.5, -0.5, -0.5])


def test_easyllp_loss_and_gradient() -> None:
    batch = _batch([2, 2], [2.0, 0.0])
    preds = np.array([0.9, 0.8, 0.2, 0.1])

    value, _ = easyllp_loss(batch, preds, 0.5)

    assert math.isfinite(value)
    _check_gradient(lambda p: easyllp_loss(batch, p, 0.5), preds)


def test_easyllp_surrogates_average_to_the_true_label() -> None:
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 2, size=20).astype(np.float64)
    prior = float(labels.mean())
    size, baggings = 8, 10_000
    # Members are drawn with replacement.
    drawn = rng.integers(0, labels.size, size=(baggings, size))
    batch = BagBatch.from_arrays([size] * baggings, labels[drawn].sum(axis=1))

    surrogates = easyllp_surrogates(batch, prior)

    slots = drawn.ravel()
    for instance in range(labels.size):
        values = surrogates[slots == instance]
        stderr = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - labels[instance]) <= 4 * stderr


def test_similarity_term_example() -> None:
    x = np.array([[1.0, 0.0], [1.0, 0.0]])

    value, grad = similarity_term(x, np.array([0.2, 0.6]))

    assert value == pytest.approx(0.16)
    assert grad.tolist() == pytest.approx([-0.8, 0.8])


def test_similarity_term_gradient() -> None:
    rng = np.random.default_rng(2)
    x = rng.normal(scale=0.5, size=(6, 3))

    _check_gradient(lambda p: similarity_term(x, p), _preds(6, 2))


def test_simllp_without_similarity_is_bag_loss() -> None:
    batch = _batch([2, 2], [1.0, 0.0], x=np.eye(4))
    preds = _preds(4)

    value, grad = simllp_loss(batch, preds, np.random.default_rng(0), lam=0.0)
    expected_value, expected_grad = dllp_bce(batch, preds)

    assert value == expected_value
    assert np.array_equal(grad, expected_grad)


def test_simllp_adds_similarity_on_full_sample() -> None:
    x = np.random.default_rng(1).normal(size=(5, 2))
    batch = _batch([2, 3], [1.0, 2.0], x=x)
    preds = _preds(5, 4)

    value, _ = simllp_loss(batch, preds, np.random.default_rng(0), lam=0.5)

    assert value == pytest.approx(dllp_bce(batch, preds)[0] + 0.5 * similarity_term(x, preds)[0])
    _check_gradient(lambda p: simllp_loss(batch, p, np.random.default_rng(0), lam=0.5), preds)


def test_simllp_rejects_bad_inputs() -> None:
    batch = _batch([2], [1.0])

    with pytest.raises(DataValidationError):
        simllp_loss(batch, np.full(2, 0.5), np.random.default_rng(0))
    with pytest.raises(DataValidationError):
        simllp_loss(batch, np.full(2, 0.5), np.random.default_rng(0), lam=-1.0)


def _statistic(weights, mu) -> MeanMapStatistic:
    weights = np.asarray(weights, dtype=np.float64)
    return MeanMapStatistic(bag_weights=weights, mu=np.asarray(mu, dtype=np.float64), instances=10)


def test_meanmap_loss_example_and_gradient() -> None:
    batch = _batch([2, 2], [1.0, 1.0])

    value, grad = meanmap_loss(batch, np.zeros(4), _statistic([0.5, 0.5], []), moment_weight=0.0)

    assert value == pytest.approx(math.log(2))
    assert np.allclose(grad, 0.0)
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, size=(4, 3)).astype(float)
    statistic = _statistic([1.0, 1 / 3], rng.uniform(0, 1, size=3))
    _check_gradient(lambda f: meanmap_loss(_batch([1, 3], [1.0, 1.0], x), f, statistic), rng.normal(size=4))


def test_meanmap_weights_come_from_the_statistic() -> None:
    batch = replace(_batch([2], [1.0]), bag_ids=np.array([1]))

    low, _ = meanmap_loss(batch, np.ones(2), _statistic([0.0, 1.0], []), moment_weight=0.0)
    high, _ = meanmap_loss(batch, np.ones(2), _statistic([1.0, 0.0], []), moment_weight=0.0)

    assert low == pytest.approx(math.log1p(math.exp(1.0)) - 1.0)
    assert high == pytest.approx(math.log1p(math.exp(1.0)))
    with pytest.raises(DataValidationError):
        meanmap_loss(batch, np.ones(2), _statistic([1.0], []), moment_weight=0.0)


def test_meanmap_loss_tracks_the_mean_embedding() -> None:
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    batch = _batch([3], [2.0], x)
    logits = np.array([0.3, -0.2, 1.1])

    near = meanmap_loss(batch, logits, _statistic([2 / 3], sigmoid(logits) @ x / 3))
    far = meanmap_loss(batch, logits, _statistic([2 / 3], [5.0, -5.0]))
    unweighted = meanmap_loss(batch, logits, _statistic([2 / 3], [5.0, -5.0]), moment_weight=0.0)

    assert near[0] == pytest.approx(unweighted[0])
    assert far[0] > near[0] + 1.0
    assert not np.allclose(far[1], near[1])
    with pytest.raises(DataValidationError):
        meanmap_loss(_batch([3], [2.0]), logits, _statistic([2 / 3], [0.0, 0.0]))


def test_meanmap_statistic() -> None:
    table = nine_row_table()
    coll = group_by_key(table, GroupingKey((0, 1)))

    statistic = meanmap_mu(coll, table)

    expected = sum(
        prop * multihot_batch(table, bag.members).sum(axis=0) for prop, bag in zip(coll.proportions, coll.bags)
    ) / table.m
    assert statistic.instances == 9
    assert np.allclose(statistic.mu, expected)
    assert statistic.bag_weights.tolist() == pytest.approx([2 / 3, 0.0, 2 / 3, 1.0])
