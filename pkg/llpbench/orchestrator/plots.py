"""Static SVG scatter plots of hardness metrics across datasets."""
from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ..utils.io import atomic_write_bytes  # noqa: E402

logger = logging.getLogger(__name__)

PER_DATASET_METRICS: Tuple[str, ...] = (
    "mean_bag_size",
    "label_prop_stdev",
    "inter_intra_ratio",
    "cramers_v",
)
PAIRWISE: Tuple[Tuple[str, str], ...] = (
    ("mean_bag_size", "label_prop_stdev"),
    ("label_prop_stdev", "inter_intra_ratio"),
    ("inter_intra_ratio", "mean_bag_size"),
)
_HASH_SALT = "llpbench"


def _svg_bytes(fig: plt.Figure) -> bytes:
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": _HASH_SALT}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def _finite(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    return frame.replace([np.inf, -np.inf], np.nan).dropna(subset=list(columns))


def metric_scatter(
    metrics: pd.DataFrame,
    metric: str,
    path: Path,
    *,
    clusters: Optional[Mapping[str, str]] = None,
) -> Optional[Path]:
    """Datasets on the x-axis (sorted by value), the metric on the y-axis."""

    data = _finite(metrics, [metric]).sort_values([metric, "dataset_id"])
    if data.empty:
        return None
    fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(data)), 3.5))
    positions = np.arange(len(data))
    if clusters:
        names = [clusters.get(ds, "unassigned") for ds in data["dataset_id"]]
        for name in sorted(set(names)):
            mask = np.array([n == name for n in names])
            ax.scatter(positions[mask], data[metric].to_numpy()[mask], label=name, s=18)
        ax.legend(fontsize="x-small")
    else:
        ax.scatter(positions, data[metric], s=18)
    ax.set_xticks(positions)
    ax.set_xticklabels(data["dataset_id"], rotation=90, fontsize="xx-small")
    ax.set_ylabel(metric)
    fig.tight_layout()
    return atomic_write_bytes(path, _svg_bytes(fig))


def pairwise_scatter(metrics: pd.DataFrame, x: str, y: str, path: Path) -> Optional[Path]:
    data = _finite(metrics, [x, y]).sort_values("dataset_id")
    if data.empty:
        return None
    fig, ax = plt.subplots(figsize=(4.0, 3.5))
    ax.scatter(data[x], data[y], s=18)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    fig.tight_layout()
    return atomic_write_bytes(path, _svg_bytes(fig))


def write_report_plots(
    metrics: pd.DataFrame,
    out_dir: Path,
    *,
    clusters: Optional[Mapping[str, str]] = None,
) -> List[Path]:
    written: List[Path] = []
    for metric in PER_DATASET_METRICS:
        if metric in metrics.columns:
            path = metric_scatter(metrics, metric, out_dir / f"{metric}.svg", clusters=clusters)
            if path is not None:
                written.append(path)
    for x, y in PAIRWISE:
        if x in metrics.columns and y in metrics.columns:
            path = pairwise_scatter(metrics, x, y, out_dir / f"{x}__vs__{y}.svg")
            if path is not None:
                written.append(path)
    logger.info("plots.written", extra={"count": len(written)})
    return written


__all__ = ["PAIRWISE", "PER_DATASET_METRICS", "metric_scatter", "pairwise_scatter", "write_report_plots"]
