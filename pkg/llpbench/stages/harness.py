"""Bag-respecting folds, the minibatch training loop and evaluation metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from time import monotonic
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..methods import LLPMethod, load_method, require_supported
from ..methods.batch import BagBatch
from ..methods.dllp import bce_terms
from ..methods.ot import pseudo_label_bce
from ..utils.config import BAGS_PER_BATCH, LEARNING_RATE, MAX_EPOCHS, PATIENCE
from ..utils.errors import ConfigurationError, DataValidationError, EmptyDataError
from ..utils.logging import increment_counter
from .bagging import (
    Bag,
    BagCollection,
    ProvenanceKind,
    fixed_size_feature_bags,
    group_by_key,
    random_fixed_bags,
)
from .ingest import InstanceTable, Task
from .model import (
    DEFAULT_HIDDEN,
    AdamState,
    Head,
    ModelParams,
    adam_step,
    backward,
    forward,
    init_params,
    input_dim,
    multihot_batch,
)

logger = logging.getLogger(__name__)

N_FOLDS = 5
PSEUDO_EPOCHS = 10
INSTANCE_TEST_FRACTION = 0.2
INSTANCE_BATCH = 256
PREDICT_CHUNK = 4096


class Metric(str, Enum):
    AUC = "auc"
    MSE = "mse"
    ACCURACY = "accuracy"

    @property
    def higher_is_better(self) -> bool:
        return self is not Metric.MSE


class Phase(str, Enum):
    MAIN = "main"
    PRETRAIN = "pretrain"
    PSEUDO = "pseudo"


# ---------------------------------------------------------------------------
# Metrics


def _aligned(preds: Sequence[float], labels: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise DataValidationError(f"{p.size} predictions for {y.size} labels")
    if p.size == 0:
        raise EmptyDataError("metrics need at least one prediction")
    return p, y


def auc(preds: Sequence[float], labels: Sequence[float]) -> float:
    """Mann-Whitney AUC; tied scores share their average rank."""

    p, y = _aligned(preds, labels)
    positives = y == 1.0
    n_pos = int(positives.sum())
    n_neg = int((y == 0.0).sum())
    if n_pos + n_neg != y.size:
        raise DataValidationError("AUC needs labels in {0, 1}")
    if n_pos == 0 or n_neg == 0:
        raise DataValidationError("AUC needs both classes present")
    _, inverse, counts = np.unique(p, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    ranks = (upper - (counts - 1) / 2.0)[inverse]
    u_stat = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def mse(preds: Sequence[float], labels: Sequence[float]) -> float:
    p, y = _aligned(preds, labels)
    return float(np.mean((p - y) ** 2))


def accuracy(preds: Sequence[float], labels: Sequence[float], threshold: float = 0.5) -> float:
    p, y = _aligned(preds, labels)
    return float(np.mean((p > threshold).astype(np.float64) == y))


_METRICS: Dict[Metric, Callable[[Sequence[float], Sequence[float]], float]] = {
    Metric.AUC: auc,
    Metric.MSE: mse,
    Metric.ACCURACY: accuracy,
}


def evaluate(metric: Metric | str, preds: np.ndarray, labels: np.ndarray) -> float:
    return _METRICS[Metric(metric)](preds, labels)


def default_metric(task: Task) -> Metric:
    return Metric.ACCURACY if task is Task.BINARY else Metric.MSE


# ---------------------------------------------------------------------------
# Folds


@dataclass(frozen=True)
class Fold:
    index: int
    train: np.ndarray
    test: np.ndarray
    train_bags: BagCollection


@dataclass(frozen=True)
class FoldPlan:
    folds: Tuple[Fold, ...]
    retained: np.ndarray

    def __len__(self) -> int:
        return len(self.folds)

    def check(self) -> None:
        """Raise when disjointness, coverage or train-bag containment fails."""

        retained = set(self.retained.tolist())
        seen: set[int] = set()
        for fold in self.folds:
            test = set(fold.test.tolist())
            train = set(fold.train.tolist())
            if test & seen:
                raise DataValidationError(f"fold {fold.index} test set overlaps an earlier fold")
            seen |= test
            if train & test or (train | test) != retained:
                raise DataValidationError(f"fold {fold.index} train/test do not partition the retained set")
            for bag in fold.train_bags.bags:
                if not train.issuperset(bag.members):
                    raise DataValidationError(f"fold {fold.index} has a train bag outside the train split")
        if seen != retained:
            raise DataValidationError("test folds do not cover the retained instances")


def rebag(table: InstanceTable, template: BagCollection, indices: np.ndarray, seed: int) -> BagCollection:
    """Rebuild bags on *indices* the way *template* was built."""

    prov = template.provenance
    if prov.kind is ProvenanceKind.FEATURE:
        assert prov.key is not None
        return group_by_key(table, prov.key, indices=indices)
    if prov.q is None:
        raise DataValidationError("fixed-size provenance without a bag size")
    if prov.kind is ProvenanceKind.RANDOM:
        return random_fixed_bags(table, prov.q, seed, indices=indices)
    assert prov.key is not None
    return fixed_size_feature_bags(table, prov.key, prov.q, seed, indices=indices)


def five_fold_split(
    table: InstanceTable,
    filtered: BagCollection,
    seed: int,
    *,
    n_folds: int = N_FOLDS,
) -> FoldPlan:
    """Shuffle the retained instances into near-equal folds and re-bag each train split.

    Train bags are rebuilt with the dataset's own provenance and are not re-filtered.
    """

    if not len(filtered):
        raise EmptyDataError("no bags survived filtering")
    retained = filtered.members()
    if retained.size < n_folds:
        raise EmptyDataError(f"{retained.size} retained instances cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    shuffled = retained[rng.permutation(retained.size)]
    chunks = np.array_split(shuffled, n_folds)
    folds: List[Fold] = []
    for index, chunk in enumerate(chunks):
        test = np.sort(chunk)
        train = np.setdiff1d(retained, test, assume_unique=True)
        folds.append(
            Fold(
                index=index,
                train=train,
                test=test,
                train_bags=rebag(table, filtered, train, seed + index),
            )
        )
    plan = FoldPlan(folds=tuple(folds), retained=retained)
    plan.check()
    logger.info("harness.five_fold_split", extra={"retained": int(retained.size), "folds": n_folds})
    return plan


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    method: str = "dllp-bce"
    lr: float = LEARNING_RATE
    bags_per_batch: int = BAGS_PER_BATCH
    patience: int = PATIENCE
    max_epochs: int = MAX_EPOCHS
    seed: int = 0
    metric: Optional[Metric] = None
    hidden: Tuple[int, int] = DEFAULT_HIDDEN
    instances_per_batch: Optional[int] = None
    pseudo_epochs: int = PSEUDO_EPOCHS
    instance_loss: Optional[str] = None
    instance_batch: int = INSTANCE_BATCH
    method_options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.bags_per_batch < 1:
            raise ConfigurationError(f"bags_per_batch must be >= 1, got {self.bags_per_batch}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 0 or self.pseudo_epochs < 0:
            raise ConfigurationError("epoch limits must be >= 0")
        if not self.lr > 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.lr}")
        if self.instance_loss not in (None, "bce", "mse"):
            raise ConfigurationError(f"instance_loss must be bce or mse, got {self.instance_loss}")
        if self.metric is not None:
            object.__setattr__(self, "metric", Metric(self.metric))

    def monitored(self, task: Task) -> Metric:
        return self.metric or default_metric(task)

    def batch_size_for(self, coll: BagCollection) -> int:
        q = coll.provenance.q
        if self.instances_per_batch and q:
            return max(1, self.instances_per_batch // q)
        return self.bags_per_batch

    def to_dict(self) -> Dict[str, object]:
        return {
            "method": self.method,
            "lr": self.lr,
            "bags_per_batch": self.bags_per_batch,
            "patience": self.patience,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
            "metric": self.metric.value if self.metric else None,
            "hidden": list(self.hidden),
            "instances_per_batch": self.instances_per_batch,
            "pseudo_epochs": self.pseudo_epochs,
            "instance_batch": self.instance_batch,
            "instance_loss": self.instance_loss,
            "method_options": dict(self.method_options),
        }


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_metric: float
    phase: Phase = Phase.MAIN

    def to_dict(self) -> Dict[str, object]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "test_metric": self.test_metric,
            "phase": self.phase.value,
        }


@dataclass
class TrainRun:
    method: str
    fold: int
    metric: Metric
    history: List[EpochRecord]
    best_epoch: int
    best_metric: Optional[float]
    params: ModelParams
    seconds: float
    test_auc: Optional[float] = None
    dataset_id: Optional[str] = None
    steps: int = 0

    def to_dict(self, *, include_timing: bool = False) -> Dict[str, object]:
        payload: Dict[str, object] = {
            "method": self.method,
            "fold": self.fold,
            "metric": self.metric.value,
            "history": [record.to_dict() for record in self.history],
            "best_epoch": self.best_epoch,
            "best_metric": self.best_metric,
            "test_auc": self.test_auc,
            # Wall time is opt-in so identical runs serialise identically.
            "seconds": self.seconds if include_timing else None,
        }
        if self.dataset_id is not None:
            payload["dataset_id"] = self.dataset_id
        return payload


def predict(
    params: ModelParams, table: InstanceTable, indices: np.ndarray, head: Head
) -> np.ndarray:
    """Predictions for *indices* computed in fixed-size chunks."""

    out = np.empty(indices.size, dtype=np.float64)
    for start in range(0, indices.size, PREDICT_CHUNK):
        chunk = indices[start : start + PREDICT_CHUNK]
        out[start : start + chunk.size], _ = forward(params, multihot_batch(table, chunk), head)
    return out


class _Tracker:
    """Best-so-far state plus per-phase patience."""

    def __init__(self, params: ModelParams, metric: Metric, patience: int) -> None:
        self.metric = metric
        self.patience = patience
        self.history: List[EpochRecord] = []
        self.best_params = params.copy()
        self.best_epoch = -1
        self.best_metric: Optional[float] = None

    def _better(self, score: float, reference: Optional[float]) -> bool:
        if math.isnan(score):
            return reference is None
        if reference is None or math.isnan(reference):
            return True
        return score > reference if self.metric.higher_is_better else score < reference

    def run_phase(
        self,
        phase: Phase,
        epochs: int,
        params: ModelParams,
        epoch_fn: Callable[[], float],
        score_fn: Callable[[], float],
    ) -> None:
        phase_best: Optional[float] = None
        stale = 0
        for _ in range(epochs):
            train_loss = epoch_fn()
            score = score_fn()
            epoch = len(self.history)
            self.history.append(EpochRecord(epoch, train_loss, score, phase))
            logger.debug(
                "harness.epoch",
                extra={"epoch": epoch, "phase": phase.value, "train_loss": train_loss, "test_metric": score},
            )
            increment_counter("harness.epochs")
            if self._better(score, self.best_metric):
                self.best_metric = score
                self.best_epoch = epoch
                self.best_params = params.copy()
            if self._better(score, phase_best):
                phase_best = score
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break


def _step(
    params: ModelParams,
    state: AdamState,
    x: np.ndarray,
    head: Head,
    lr: float,
    loss_fn: Callable[[np.ndarray, np.ndarray], Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]],
) -> float:
    preds, cache = forward(params, x, head)
    value, d_pred, d_logit = loss_fn(preds, cache.logits)
    grads = backward(params, cache, d_pred, d_logit=d_logit)
    adam_step(params, grads, state, lr)
    return value


def _bag_epoch(
    table: InstanceTable,
    bags: Sequence[Bag],
    batch_size: int,
    order_rng: np.random.Generator,
    batch_loss: Callable[[BagBatch, np.ndarray, np.ndarray], Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]],
    params: ModelParams,
    state: AdamState,
    head: Head,
    lr: float,
) -> float:
    order = order_rng.permutation(len(bags))
    losses: List[float] = []
    visited = 0
    for start in range(0, order.size, batch_size):
        picked = order[start : start + batch_size]
        chosen = [bags[i] for i in picked]
        visited += len(chosen)
        batch = BagBatch.from_bags(table, chosen, bag_ids=picked)
        losses.append(
            _step(params, state, batch.x, head, lr, lambda p, f, b=batch: batch_loss(b, p, f))
        )
    if visited != len(bags):
        raise RuntimeError(f"epoch visited {visited} of {len(bags)} bags")
    return float(np.mean(losses)) if losses else 0.0


def train(
    table: InstanceTable,
    fold: Fold,
    config: TrainConfig,
    *,
    model_seed: Optional[int] = None,
    dataset_id: Optional[str] = None,
) -> TrainRun:
    """Train one method on one fold with early stopping on the test metric."""

    started = monotonic()
    method: LLPMethod = load_method(config.method, **dict(config.method_options))
    require_supported(method, table.task)
    metric = config.monitored(table.task)
    head = method.head(table.task)
    seed = config.seed if model_seed is None else model_seed
    order_seq, loss_seq = np.random.SeedSequence([seed, fold.index + 1]).spawn(2)
    order_rng = np.random.default_rng(order_seq)
    loss_rng = np.random.default_rng(loss_seq)

    bags = fold.train_bags.bags
    if not bags:
        raise EmptyDataError(f"fold {fold.index} has no train bags")
    params = init_params(seed, input_dim(table), config.hidden)
    state = AdamState.for_params(params)
    method.prepare(table, fold.train_bags)
    batch_size = config.batch_size_for(fold.train_bags)
    test_labels = table.labels[fold.test]
    tracker = _Tracker(params, metric, config.patience)

    def score() -> float:
        return evaluate(metric, predict(params, table, fold.test, head), test_labels)

    def method_loss(batch: BagBatch, preds: np.ndarray, logits: np.ndarray):
        result = method.loss_and_grad(batch, preds, logits, loss_rng)
        return result.value, result.d_pred, result.d_logit

    def method_epoch() -> float:
        return _bag_epoch(table, bags, batch_size, order_rng, method_loss, params, state, head, config.lr)

    first_phase = Phase.PRETRAIN if method.two_phase else Phase.MAIN
    tracker.run_phase(first_phase, config.max_epochs, params, method_epoch, score)

    if method.two_phase and tracker.history:
        _restore(params, tracker.best_params)
        members = fold.train
        position = np.full(table.m, -1, dtype=np.int64)
        position[members] = np.arange(members.size)
        targets = np.zeros(table.m)

        def relabel_epoch() -> float:
            preds = predict(params, table, members, head)
            for bag in bags:
                slots = position[list(bag.members)]
                targets[list(bag.members)] = method.pseudo_labels(preds[slots], bag.label_sum).values  # type: ignore[attr-defined]
            increment_counter("harness.pseudo_label_rounds")

            def pseudo_loss(batch: BagBatch, p: np.ndarray, logits: np.ndarray):
                value, grad = pseudo_label_bce(p, targets[batch.members])
                return value, grad, None

            return _bag_epoch(table, bags, batch_size, order_rng, pseudo_loss, params, state, head, config.lr)

        tracker.run_phase(Phase.PSEUDO, config.pseudo_epochs, params, relabel_epoch, score)

    return _finish(
        tracker,
        table,
        fold.test,
        head,
        method=config.method,
        fold_index=fold.index,
        started=started,
        dataset_id=dataset_id,
        steps=state.t,
    )


def _restore(params: ModelParams, source: ModelParams) -> None:
    for name, block in source.blocks():
        getattr(params, name)[...] = block


def _finish(
    tracker: _Tracker,
    table: InstanceTable,
    test: np.ndarray,
    head: Head,
    *,
    method: str,
    fold_index: int,
    started: float,
    dataset_id: Optional[str],
    steps: int,
) -> TrainRun:
    best = tracker.best_params
    test_auc: Optional[float] = None
    if table.task is Task.BINARY:
        labels = table.labels[test]
        if labels.min() != labels.max():
            test_auc = auc(predict(best, table, test, head), labels)
    run = TrainRun(
        method=method,
        fold=fold_index,
        metric=tracker.metric,
        history=tracker.history,
        best_epoch=tracker.best_epoch,
        best_metric=tracker.best_metric,
        params=best,
        seconds=monotonic() - started,
        test_auc=test_auc,
        dataset_id=dataset_id,
        steps=steps,
    )
    logger.info(
        "harness.train_finished",
        extra={
            "method": method,
            "fold": fold_index,
            "epochs": len(run.history),
            "best_epoch": run.best_epoch,
            "best_metric": run.best_metric,
        },
    )
    return run


def instance_split(indices: np.ndarray, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded 80:20 train/test split of *indices*."""

    if indices.size < 2:
        raise EmptyDataError("instance-level training needs at least 2 instances")
    shuffled = indices[np.random.default_rng(seed).permutation(indices.size)]
    n_test = min(max(1, int(round(INSTANCE_TEST_FRACTION * indices.size))), indices.size - 1)
    return np.sort(shuffled[n_test:]), np.sort(shuffled[:n_test])


def instance_level_train(
    table: InstanceTable,
    config: TrainConfig,
    *,
    indices: Optional[Sequence[int]] = None,
    dataset_id: Optional[str] = None,
) -> TrainRun:
    """Per-instance training on an 80:20 split; the reference ceiling for bag methods."""

    started = monotonic()
    pool = np.arange(table.m) if indices is None else np.sort(np.asarray(indices, dtype=np.int64))
    train_idx, test_idx = instance_split(pool, config.seed)
    loss_name = config.instance_loss or ("bce" if table.task is Task.BINARY else "mse")
    head = Head.SIGMOID if table.task is Task.BINARY else Head.IDENTITY
    metric = config.monitored(table.task)
    params = init_params(config.seed, input_dim(table), config.hidden)
    state = AdamState.for_params(params)
    order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    tracker = _Tracker(params, metric, config.patience)
    test_labels = table.labels[test_idx]

    def loss_fn(labels: np.ndarray):
        def compute(preds: np.ndarray, logits: np.ndarray):
            if loss_name == "bce":
                terms, grad = bce_terms(labels, preds)
                return float(terms.mean()), grad / preds.size, None
            residual = preds - labels
            return float(np.mean(residual**2)), 2.0 * residual / preds.size, None

        return compute

    def epoch() -> float:
        order = train_idx[order_rng.permutation(train_idx.size)]
        losses = []
        for start in range(0, order.size, config.instance_batch):
            chunk = order[start : start + config.instance_batch]
            x = multihot_batch(table, chunk)
            losses.append(_step(params, state, x, head, config.lr, loss_fn(table.labels[chunk])))
        return float(np.mean(losses))

    def score() -> float:
        return evaluate(metric, predict(params, table, test_idx, head), test_labels)

    tracker.run_phase(Phase.MAIN, config.max_epochs, params, epoch, score)
    return _finish(
        tracker,
        table,
        test_idx,
        head,
        method=f"instance-{loss_name}",
        fold_index=-1,
        started=started,
        dataset_id=dataset_id,
        steps=state.t,
    )


@dataclass(frozen=True)
class RunAggregate:
    dataset_id: Optional[str]
    method: str
    metric: Metric
    runs: int
    mean: float
    std: float
    auc_mean: Optional[float] = None
    auc_std: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "dataset_id": self.dataset_id,
            "method": self.method,
            "metric": self.metric.value,
            "runs": self.runs,
            "mean": self.mean,
            "std": self.std,
            "auc_mean": self.auc_mean,
            "auc_std": self.auc_std,
        }


def aggregate_runs(runs: Sequence[TrainRun]) -> RunAggregate:
    """Mean and population standard deviation of the best metric over folds."""

    if not runs:
        raise EmptyDataError("nothing to aggregate")
    methods = {run.method for run in runs}
    if len(methods) != 1:
        raise DataValidationError(f"cannot aggregate across methods: {sorted(methods)}")
    scores = np.array([run.best_metric for run in runs if run.best_metric is not None], dtype=np.float64)
    aucs = np.array([run.test_auc for run in runs if run.test_auc is not None], dtype=np.float64)
    return RunAggregate(
        dataset_id=runs[0].dataset_id,
        method=runs[0].method,
        metric=runs[0].metric,
        runs=len(runs),
        mean=float(scores.mean()) if scores.size else float("nan"),
        std=float(scores.std()) if scores.size else float("nan"),
        auc_mean=float(aucs.mean()) if aucs.size else None,
        auc_std=float(aucs.std()) if aucs.size else None,
    )


__all__ = [
    "EpochRecord",
    "Fold",
    "FoldPlan",
    "Metric",
    "N_FOLDS",
    "Phase",
    "RunAggregate",
    "TrainConfig",
    "TrainRun",
    "accuracy",
    "aggregate_runs",
    "auc",
    "default_metric",
    "evaluate",
    "five_fold_split",
    "instance_level_train",
    "instance_split",
    "mse",
    "predict",
    "rebag",
    "train",
]
