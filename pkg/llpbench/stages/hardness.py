"""Hardness metrics for LLP datasets.

Covers label-proportion spread, bag-size distribution, bag separation (quadratic
reference and the linear-time squared-Euclidean path), label bias, Cramer's V and
the skewed-large-bag diagnostic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import DataValidationError, EmptyDataError
from ..utils.logging import enforce_instance_limit, increment_counter, scoped_timer
from .bagging import BagCollection
from .ingest import InstanceTable, Mode, Task

logger = logging.getLogger(__name__)

PERCENTILE_LEVELS: Tuple[int, ...] = (50, 70, 85, 95)


class SpaceMode(str, Enum):
    MULTIHOT = "multihot"
    RAW_NUMERIC = "raw_numeric"


class Distance(str, Enum):
    L2 = "l2"
    L2SQ = "l2sq"


class FeatureSpace:
    """Vector view of a table used for separation statistics.

    ``multihot`` concatenates one block per categorical column with the numerical
    columns min-max scaled to [0, 1]; ``raw_numeric`` uses raw codes and raw values.
    """

    def __init__(self, table: InstanceTable, mode: SpaceMode | str = SpaceMode.MULTIHOT) -> None:
        self.table = table
        self.mode = SpaceMode(mode)
        sizes = np.asarray(table.vocab_sizes, dtype=np.int64)
        self._offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64) if sizes.size else sizes
        if table.n_num and table.m:
            low = table.num.min(axis=0)
            span = table.num.max(axis=0) - low
        else:
            low = np.zeros(table.n_num)
            span = np.zeros(table.n_num)
        self._num_low = low
        # Constant columns scale to 0 rather than dividing by zero.
        self._num_span = np.where(span > 0, span, 1.0)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]] | np.ndarray) -> "FeatureSpace":
        """Raw Euclidean space over explicit points (no categorical columns)."""

        array = np.atleast_2d(np.asarray(points, dtype=np.float64))
        m = array.shape[0]
        table = InstanceTable(
            cat=np.zeros((m, 0), dtype=np.int64),
            num=array,
            labels=np.zeros(m),
            vocab_sizes=(),
            cat_names=(),
            num_names=tuple(f"x{i}" for i in range(array.shape[1])),
            mode=Mode.SSCL,
        )
        return cls(table, SpaceMode.RAW_NUMERIC)

    @property
    def dim(self) -> int:
        if self.mode is SpaceMode.MULTIHOT:
            return int(sum(self.table.vocab_sizes)) + self.table.n_num
        return self.table.n_cat + self.table.n_num

    def _numeric(self, indices: np.ndarray) -> np.ndarray:
        values = self.table.num[indices]
        if self.mode is SpaceMode.MULTIHOT:
            return (values - self._num_low) / self._num_span
        return values

    def vectors(self, indices: Sequence[int] | np.ndarray) -> np.ndarray:
        """Dense vectors for *indices* (rows in the given order)."""

        idx = np.asarray(indices, dtype=np.int64)
        if self.mode is SpaceMode.RAW_NUMERIC:
            return np.hstack([self.table.cat[idx].astype(np.float64), self._numeric(idx)])
        n_onehot = int(sum(self.table.vocab_sizes))
        out = np.zeros((idx.size, self.dim), dtype=np.float64)
        if self.table.n_cat:
            cols = self.table.cat[idx] + self._offsets
            out[np.arange(idx.size)[:, None], cols] = 1.0
        out[:, n_onehot:] = self._numeric(idx)
        return out

    def sq_norms(self, indices: np.ndarray) -> np.ndarray:
        numeric = self._numeric(indices)
        num_part = np.einsum("ij,ij->i", numeric, numeric)
        if self.mode is SpaceMode.MULTIHOT:
            return num_part + float(self.table.n_cat)
        codes = self.table.cat[indices].astype(np.float64)
        return num_part + np.einsum("ij,ij->i", codes, codes)

    def bag_aggregates(self, coll: BagCollection) -> Tuple[np.ndarray, np.ndarray]:
        """Per-bag mean squared norm and mean vector, in one pass over members."""

        sizes = coll.sizes.astype(np.float64)
        members = np.concatenate([np.asarray(bag.members, dtype=np.int64) for bag in coll.bags])
        owner = np.repeat(np.arange(len(coll.bags)), coll.sizes)
        mean_sq = np.bincount(owner, weights=self.sq_norms(members), minlength=len(coll.bags)) / sizes
        means = np.zeros((len(coll.bags), self.dim), dtype=np.float64)
        if self.mode is SpaceMode.MULTIHOT:
            n_onehot = int(sum(self.table.vocab_sizes))
            for col in range(self.table.n_cat):
                np.add.at(means, (owner, self.table.cat[members, col] + self._offsets[col]), 1.0)
            np.add.at(means[:, n_onehot:], owner, self._numeric(members))
        else:
            np.add.at(means, owner, self.vectors(members))
        means /= sizes[:, None]
        return mean_sq, means


@dataclass(frozen=True)
class SepStats:
    mean_inter: float
    mean_intra: float
    ratio: float
    ratio_degenerate: bool = False

    @classmethod
    def build(cls, mean_inter: float, mean_intra: float) -> "SepStats":
        if mean_intra > 0:
            return cls(mean_inter, mean_intra, mean_inter / mean_intra)
        return cls(mean_inter, mean_intra, float("inf"), ratio_degenerate=True)

    def to_dict(self) -> Dict[str, object]:
        return {
            "mean_inter": self.mean_inter,
            "mean_intra": self.mean_intra,
            "ratio": self.ratio,
            "ratio_degenerate": self.ratio_degenerate,
        }


def _require_bags(coll: BagCollection, minimum: int = 1) -> None:
    if len(coll) < minimum:
        raise EmptyDataError(f"operation needs at least {minimum} bag(s), got {len(coll)}")


def label_prop_stdev(coll: BagCollection) -> float:
    """Population standard deviation of bag label proportions."""

    _require_bags(coll)
    return float(np.std(coll.proportions))


def mean_bag_size(coll: BagCollection) -> float:
    _require_bags(coll)
    return float(coll.sizes.sum() / len(coll))


def bag_size_stdev(coll: BagCollection) -> float:
    _require_bags(coll)
    return float(np.std(coll.sizes))


def cumu_bag_size_percentiles(
    coll: BagCollection, levels: Sequence[int] = PERCENTILE_LEVELS
) -> Dict[int, int]:
    """Smallest size ``s`` with at least ``t%`` of bags of size at most ``s``."""

    _require_bags(coll)
    ordered = np.sort(coll.sizes)
    n = ordered.size
    result: Dict[int, int] = {}
    for level in levels:
        if not 0 < level <= 100:
            raise DataValidationError(f"percentile level must be in (0, 100], got {level}")
        rank = max((level * n + 99) // 100, 1)
        result[int(level)] = int(ordered[rank - 1])
    return result


def bag_sep_naive(
    space: FeatureSpace, coll: BagCollection, d: Distance | str = Distance.L2SQ
) -> np.ndarray:
    """Full ``|B| x |B|`` bag-separation matrix by pairwise enumeration."""

    _require_bags(coll)
    distance = Distance(d)
    enforce_instance_limit(int(coll.sizes.sum()))
    blocks = [space.vectors(bag.members) for bag in coll.bags]
    n = len(blocks)
    matrix = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            diff = blocks[i][:, None, :] - blocks[j][None, :, :]
            sq = np.einsum("abk,abk->ab", diff, diff)
            pair = np.sqrt(sq) if distance is Distance.L2 else sq
            matrix[i, j] = matrix[j, i] = float(pair.mean())
    increment_counter("hardness.naive_pairs", n * (n + 1) // 2)
    return matrix


def sep_stats_from_matrix(matrix: np.ndarray) -> SepStats:
    n = matrix.shape[0]
    if n < 2:
        raise EmptyDataError("separation statistics need at least 2 bags")
    mean_intra = float(np.trace(matrix) / n)
    mean_inter = float((matrix.sum() - np.trace(matrix)) / (n * (n - 1)))
    return SepStats.build(mean_inter, mean_intra)


def sep_stats_naive(
    space: FeatureSpace, coll: BagCollection, d: Distance | str = Distance.L2SQ
) -> SepStats:
    _require_bags(coll, 2)
    return sep_stats_from_matrix(bag_sep_naive(space, coll, d))


def sep_stats_fast_l2sq(space: FeatureSpace, coll: BagCollection) -> SepStats:
    """Squared-Euclidean separation statistics in ``O(mn + |B|n)``.

    Uses ``BagSep(B, B') = |B| + |B'| - 2<mu(B), mu(B')>`` where ``|B|`` is the mean
    squared norm of the bag and ``mu(B)`` its mean vector.
    """

    _require_bags(coll, 2)
    n = len(coll)
    mean_sq, means = space.bag_aggregates(coll)
    mu_sq = np.einsum("ij,ij->i", means, means)
    total = means.sum(axis=0)
    mean_intra = float(np.sum(2.0 * (mean_sq - mu_sq)) / n)
    mean_inter = float(
        (2.0 / n) * mean_sq.sum() - (2.0 / (n * (n - 1))) * (float(total @ total) - mu_sq.sum())
    )
    return SepStats.build(mean_inter, mean_intra)


def label_bias(coll: BagCollection) -> float:
    """Instance-weighted positive rate ``sum y_B / sum |B|``."""

    _require_bags(coll)
    return float(coll.label_sums.sum() / coll.sizes.sum())


def avg_label_prop(coll: BagCollection) -> float:
    """Bag-weighted mean label proportion."""

    _require_bags(coll)
    return float(np.mean(coll.proportions))


def _binary_labels(labels: np.ndarray) -> np.ndarray:
    values = np.asarray(labels, dtype=np.float64)
    if not np.all((values == 0.0) | (values == 1.0)):
        raise DataValidationError("Cramer's V needs binary labels")
    return values


def cramers_v(coll: BagCollection, labels: np.ndarray) -> Tuple[float, float]:
    """Chi-squared statistic and Cramer's V between bag membership and the label."""

    _require_bags(coll, 2)
    values = _binary_labels(labels)
    observed = np.zeros((len(coll), 2), dtype=np.float64)
    for row, bag in enumerate(coll.bags):
        positives = float(values[list(bag.members)].sum())
        observed[row] = (bag.size - positives, positives)
    total = observed.sum()
    p = observed.sum(axis=1) / total
    q = observed.sum(axis=0) / total
    expected = total * np.outer(p, q)
    nonzero = expected > 0
    chi_sq = float(np.sum((observed[nonzero] - expected[nonzero]) ** 2 / expected[nonzero]))
    present_classes = int(np.count_nonzero(q))
    dof = min(len(coll) - 1, present_classes - 1)
    if dof <= 0:
        return chi_sq, 0.0
    v = float(np.sqrt((chi_sq / total) / dof))
    return chi_sq, min(v, 1.0)


def skewed_large_bag_fraction(
    table: InstanceTable, unfiltered: BagCollection, high: int, eps: float
) -> float:
    """Fraction of all instances in bags larger than *high* with skewed proportion."""

    if not 0 < eps < 0.5:
        raise DataValidationError(f"eps must lie in (0, 0.5), got {eps}")
    if table.m == 0:
        return 0.0
    sizes = unfiltered.sizes
    props = unfiltered.proportions if len(unfiltered) else np.zeros(0)
    skewed = (sizes > high) & ((props < eps) | (props > 1.0 - eps))
    return float(sizes[skewed].sum() / table.m)


@dataclass(frozen=True)
class HardnessReport:
    dataset_id: str
    num_bags: int
    num_instances: int
    mean_bag_size: float
    bag_size_stdev: float
    label_prop_stdev: float
    percentile_sizes: Mapping[int, int]
    sep: Optional[SepStats]
    label_bias: float
    avg_label_prop: float
    feature_space: SpaceMode = SpaceMode.MULTIHOT
    chi_sq: Optional[float] = None
    cramers_v: Optional[float] = None
    provenance: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {
            "dataset_id": self.dataset_id,
            "num_bags": self.num_bags,
            "num_instances": self.num_instances,
            "mean_bag_size": self.mean_bag_size,
            "bag_size_stdev": self.bag_size_stdev,
            "label_prop_stdev": self.label_prop_stdev,
            "percentile_sizes": {str(k): v for k, v in sorted(self.percentile_sizes.items())},
            "sep": self.sep.to_dict() if self.sep is not None else None,
            "label_bias": self.label_bias,
            "avg_label_prop": self.avg_label_prop,
            "feature_space": self.feature_space.value,
            "chi_sq": self.chi_sq,
            "cramers_v": self.cramers_v,
        }
        payload.update(self.provenance)
        return payload

    def csv_row(self) -> Dict[str, object]:
        sep = self.sep
        return {
            "dataset_id": self.dataset_id,
            "num_bags": self.num_bags,
            "num_instances": self.num_instances,
            "mean_bag_size": self.mean_bag_size,
            "bag_size_stdev": self.bag_size_stdev,
            "label_prop_stdev": self.label_prop_stdev,
            "pct50": self.percentile_sizes[50],
            "pct70": self.percentile_sizes[70],
            "pct85": self.percentile_sizes[85],
            "pct95": self.percentile_sizes[95],
            "mean_inter": sep.mean_inter if sep else float("nan"),
            "mean_intra": sep.mean_intra if sep else float("nan"),
            "inter_intra_ratio": sep.ratio if sep else float("nan"),
            "label_bias": self.label_bias,
            "avg_label_prop": self.avg_label_prop,
            "cramers_v": self.cramers_v if self.cramers_v is not None else float("nan"),
        }


REPORT_COLUMNS: Tuple[str, ...] = (
    "dataset_id",
    "num_bags",
    "num_instances",
    "mean_bag_size",
    "bag_size_stdev",
    "label_prop_stdev",
    "pct50",
    "pct70",
    "pct85",
    "pct95",
    "mean_inter",
    "mean_intra",
    "inter_intra_ratio",
    "label_bias",
    "avg_label_prop",
    "cramers_v",
)


def hardness_report(
    table: InstanceTable,
    coll: BagCollection,
    *,
    dataset_id: str,
    space_mode: SpaceMode | str = SpaceMode.MULTIHOT,
    provenance: Optional[Mapping[str, str]] = None,
) -> HardnessReport:
    """Compute every hardness metric for one bag collection."""

    _require_bags(coll)
    space = FeatureSpace(table, space_mode)
    with scoped_timer(logger, "hardness.separation", extra={"dataset_id": dataset_id}):
        sep = sep_stats_fast_l2sq(space, coll) if len(coll) >= 2 else None
    chi_sq: Optional[float] = None
    v: Optional[float] = None
    if table.task is Task.BINARY and len(coll) >= 2:
        chi_sq, v = cramers_v(coll, table.labels)
    report = HardnessReport(
        dataset_id=dataset_id,
        num_bags=len(coll),
        num_instances=int(coll.sizes.sum()),
        mean_bag_size=mean_bag_size(coll),
        bag_size_stdev=bag_size_stdev(coll),
        label_prop_stdev=label_prop_stdev(coll),
        percentile_sizes=cumu_bag_size_percentiles(coll),
        sep=sep,
        label_bias=label_bias(coll),
        avg_label_prop=avg_label_prop(coll),
        feature_space=space.mode,
        chi_sq=chi_sq,
        cramers_v=v,
        provenance=dict(provenance or {}),
    )
    logger.info(
        "hardness.report",
        extra={"dataset_id": dataset_id, "num_bags": report.num_bags, "ratio": sep.ratio if sep else None},
    )
    return report


__all__ = [
    "Distance",
    "FeatureSpace",
    "HardnessReport",
    "PERCENTILE_LEVELS",
    "REPORT_COLUMNS",
    "SepStats",
    "SpaceMode",
    "avg_label_prop",
    "bag_sep_naive",
    "bag_size_stdev",
    "cramers_v",
    "cumu_bag_size_percentiles",
    "hardness_report",
    "label_bias",
    "label_prop_stdev",
    "mean_bag_size",
    "sep_stats_fast_l2sq",
    "sep_stats_from_matrix",
    "sep_stats_naive",
    "skewed_large_bag_fraction",
]
