"""k-Means grouping of datasets by hardness metrics and qualitative naming."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..utils.errors import DataValidationError
from ..utils.logging import increment_counter
from .hardness import PERCENTILE_LEVELS, HardnessReport, SepStats, SpaceMode

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 100


class Axis(str, Enum):
    TAIL_SIZE = "tail_size"
    LABEL_VARIATION = "label_variation"
    BAG_SEPARATION = "bag_separation"


TAIL_NAMES_4: Tuple[str, ...] = (
    "very short-tailed",
    "short-tailed",
    "long-tailed",
    "very long-tailed",
)
TAIL_NAMES_3: Tuple[str, ...] = ("short-tailed", "medium-tailed", "long-tailed")
LABEL_VARIATION_NAMES: Tuple[str, ...] = ("low", "medium", "high", "very high")
SEPARATION_NAMES: Tuple[str, ...] = (
    "less-separated",
    "medium-separated",
    "well-separated",
    "far-separated",
)


def default_names(axis: Axis | str, k: int) -> Tuple[str, ...]:
    axis = Axis(axis)
    if axis is Axis.TAIL_SIZE:
        pool = TAIL_NAMES_3 if k == 3 else TAIL_NAMES_4
    elif axis is Axis.LABEL_VARIATION:
        pool = LABEL_VARIATION_NAMES
    else:
        pool = SEPARATION_NAMES
    return cluster_names(pool, k)


def cluster_names(pool: Sequence[str], k: int) -> Tuple[str, ...]:
    if k <= len(pool):
        return tuple(pool[:k])
    return tuple(f"cluster-{rank}" for rank in range(k))


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: Tuple[float, ...]
    iterations: int
    converged: bool


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_distances(points, points[chosen]).min(axis=1)
    while len(chosen) < k:
        total = float(closest.sum())
        pick = int(rng.choice(n, p=closest / total))
        chosen.append(pick)
        closest = np.minimum(closest, _sq_distances(points, points[[pick]])[:, 0])
    return points[chosen].copy()


def kmeans(
    points: Sequence[Sequence[float]] | np.ndarray,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding; stops when assignments settle.

    Points are sorted by value before seeding. Labels come back in input order.
    """

    given = np.asarray(points, dtype=np.float64)
    if given.ndim == 1:
        given = given[:, None]
    order = np.lexsort(given.T[::-1]) if given.size else np.arange(given.shape[0])
    data = given[order]
    if k < 1:
        raise DataValidationError(f"k must be >= 1, got {k}")
    distinct = np.unique(data, axis=0).shape[0] if data.size else 0
    if k > distinct:
        raise DataValidationError(f"k={k} exceeds the {distinct} distinct points")
    rng = np.random.default_rng(seed)
    centers = _plus_plus(data, k, rng)
    labels = np.argmin(_sq_distances(data, centers), axis=1)
    history: List[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        for cluster in range(k):
            members = data[labels == cluster]
            # Empty clusters keep their previous center.
            if members.shape[0]:
                centers[cluster] = members.mean(axis=0)
        distances = _sq_distances(data, centers)
        updated = np.argmin(distances, axis=1)
        history.append(float(distances[np.arange(data.shape[0]), updated].sum()))
        if np.array_equal(updated, labels):
            converged = True
            break
        labels = updated
    increment_counter("characterize.kmeans_iterations", iterations)
    inertia = history[-1] if history else float(
        _sq_distances(data, centers)[np.arange(data.shape[0]), labels].sum()
    )
    restored = np.empty_like(labels)
    restored[order] = labels
    return KMeansResult(
        labels=restored,
        centers=centers,
        inertia=inertia,
        history=tuple(history),
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True)
class ClusterAssignment:
    """Named clusters; cluster index equals the rank of its ordering statistic."""

    axis: Axis
    dataset_ids: Tuple[str, ...]
    labels: Tuple[int, ...]
    names: Tuple[str, ...]
    centers: np.ndarray
    inertia: float
    ordering: Tuple[float, ...] = field(default=())

    def name_of(self, dataset_id: str) -> str:
        return self.names[self.labels[self.dataset_ids.index(dataset_id)]]

    def as_mapping(self) -> Dict[str, str]:
        return {ds: self.names[label] for ds, label in zip(self.dataset_ids, self.labels)}

    def rows(self) -> List[Dict[str, str]]:
        return [
            {"dataset_id": ds, "axis": self.axis.value, "cluster_name": self.names[label]}
            for ds, label in zip(self.dataset_ids, self.labels)
        ]


def _zscore(values: np.ndarray) -> np.ndarray:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    return (values - mean) / np.where(std > 0, std, 1.0)


def _named(
    axis: Axis,
    reports: Sequence[HardnessReport],
    raw: KMeansResult,
    statistic: np.ndarray,
    names: Optional[Sequence[str]],
) -> ClusterAssignment:
    k = raw.centers.shape[0]
    means = np.array(
        [statistic[raw.labels == c].mean() if np.any(raw.labels == c) else math.inf for c in range(k)]
    )
    # Stable sort keeps ties in cluster-index order.
    order = np.argsort(means, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    chosen = tuple(names[:k]) if names is not None and len(names) >= k else default_names(axis, k)
    return ClusterAssignment(
        axis=axis,
        dataset_ids=tuple(report.dataset_id for report in reports),
        labels=tuple(int(rank[label]) for label in raw.labels),
        names=chosen,
        centers=raw.centers[order],
        inertia=raw.inertia,
        ordering=tuple(float(means[c]) for c in order),
    )


def _check_reports(reports: Sequence[HardnessReport], k: int) -> None:
    if len(reports) < k:
        raise DataValidationError(f"need at least k={k} reports, got {len(reports)}")


def classify_tail_size(
    reports: Sequence[HardnessReport],
    k: int,
    *,
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ClusterAssignment:
    """Cluster z-scored percentile tuples; clusters ordered by their mean 70th-percentile size."""

    _check_reports(reports, k)
    tuples = np.array(
        [[report.percentile_sizes[level] for level in PERCENTILE_LEVELS] for report in reports],
        dtype=np.float64,
    )
    raw = kmeans(_zscore(tuples), k, seed, max_iters)
    return _named(Axis.TAIL_SIZE, reports, raw, tuples[:, PERCENTILE_LEVELS.index(70)], names)


def _scalar_axis(
    axis: Axis,
    reports: Sequence[HardnessReport],
    values: np.ndarray,
    k: int,
    seed: int,
    names: Optional[Sequence[str]],
    max_iters: int,
) -> ClusterAssignment:
    _check_reports(reports, k)
    raw = kmeans(values[:, None], k, seed, max_iters)
    return _named(axis, reports, raw, values, names)


def classify_label_variation(
    reports: Sequence[HardnessReport],
    k: int,
    *,
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ClusterAssignment:
    values = np.array([report.label_prop_stdev for report in reports], dtype=np.float64)
    return _scalar_axis(Axis.LABEL_VARIATION, reports, values, k, seed, names, max_iters)


def classify_bag_separation(
    reports: Sequence[HardnessReport],
    k: int,
    *,
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ClusterAssignment:
    values = []
    for report in reports:
        if report.sep is None or not math.isfinite(report.sep.ratio):
            raise DataValidationError(
                f"dataset {report.dataset_id} has no finite inter/intra ratio to cluster"
            )
        values.append(report.sep.ratio)
    return _scalar_axis(
        Axis.BAG_SEPARATION, reports, np.asarray(values, dtype=np.float64), k, seed, names, max_iters
    )


def _optional(value: object) -> Optional[float]:
    number = float(value)  # type: ignore[arg-type]
    return None if math.isnan(number) else number


def reports_from_frame(frame: pd.DataFrame) -> List[HardnessReport]:
    """Rebuild reports from the metrics CSV written by the ``metrics`` stage."""

    missing = {"dataset_id", "pct50", "pct70", "pct85", "pct95"} - set(frame.columns)
    if missing:
        raise DataValidationError(f"metrics table lacks columns: {', '.join(sorted(missing))}")
    reports: List[HardnessReport] = []
    for row in frame.to_dict(orient="records"):
        inter, intra = _optional(row["mean_inter"]), _optional(row["mean_intra"])
        reports.append(
            HardnessReport(
                dataset_id=str(row["dataset_id"]),
                num_bags=int(row["num_bags"]),
                num_instances=int(row["num_instances"]),
                mean_bag_size=float(row["mean_bag_size"]),
                bag_size_stdev=float(row["bag_size_stdev"]),
                label_prop_stdev=float(row["label_prop_stdev"]),
                percentile_sizes={level: int(row[f"pct{level}"]) for level in PERCENTILE_LEVELS},
                sep=SepStats.build(inter, intra) if inter is not None and intra is not None else None,
                label_bias=float(row["label_bias"]),
                avg_label_prop=float(row["avg_label_prop"]),
                feature_space=SpaceMode.MULTIHOT,
                cramers_v=_optional(row["cramers_v"]),
            )
        )
    return reports


def classify_all(
    reports: Sequence[HardnessReport],
    ks: Mapping[Axis, int],
    *,
    seed: int = 0,
    names: Optional[Mapping[Axis, Sequence[str]]] = None,
) -> List[ClusterAssignment]:
    """Run every requested axis; axes with fewer reports than ``k`` are skipped."""

    runners = {
        Axis.TAIL_SIZE: classify_tail_size,
        Axis.LABEL_VARIATION: classify_label_variation,
        Axis.BAG_SEPARATION: classify_bag_separation,
    }
    results: List[ClusterAssignment] = []
    for axis, k in ks.items():
        if len(reports) < k:
            logger.warning(
                "characterize.axis_skipped", extra={"axis": Axis(axis).value, "k": k, "reports": len(reports)}
            )
            continue
        axis_names = (names or {}).get(Axis(axis))
        results.append(runners[Axis(axis)](reports, k, seed=seed, names=axis_names))
    return results


__all__ = [
    "Axis",
    "ClusterAssignment",
    "KMeansResult",
    "LABEL_VARIATION_NAMES",
    "SEPARATION_NAMES",
    "TAIL_NAMES_3",
    "TAIL_NAMES_4",
    "classify_all",
    "classify_bag_separation",
    "classify_label_variation",
    "classify_tail_size",
    "cluster_names",
    "default_names",
    "kmeans",
    "reports_from_frame",
]
