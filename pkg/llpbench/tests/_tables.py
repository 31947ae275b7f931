"""Small hand-built tables shared by the test modules."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from llpbench.stages.ingest import InstanceTable, Mode


def make_table(
    cat: Sequence[Sequence[int]],
    labels: Sequence[float],
    *,
    num: Sequence[Sequence[float]] | None = None,
    vocab_sizes: Sequence[int] | None = None,
    mode: Mode = Mode.CTR,
) -> InstanceTable:
    """Build an encoded table straight from nested lists."""

    cat_arr = np.asarray(cat, dtype=np.int64).reshape(len(labels), -1)
    num_arr = (
        np.asarray(num, dtype=np.float64).reshape(len(labels), -1)
        if num is not None
        else np.zeros((len(labels), 0))
    )
    sizes = tuple(vocab_sizes) if vocab_sizes is not None else tuple(
        int(cat_arr[:, col].max()) + 1 for col in range(cat_arr.shape[1])
    )
    return InstanceTable(
        cat=cat_arr,
        num=num_arr,
        labels=np.asarray(labels, dtype=np.float64),
        vocab_sizes=sizes,
        cat_names=tuple(f"C{i + 1}" for i in range(cat_arr.shape[1])),
        num_names=tuple(f"I{i + 1}" for i in range(num_arr.shape[1])),
        mode=mode,
    )


# Nine instances over (F1, F2, F3); grouping on F1,F2 yields four bags.
NINE_ROW_CAT = [
    [0, 0, 0],
    [0, 0, 1],
    [0, 0, 2],
    [0, 1, 0],
    [0, 1, 1],
    [1, 0, 2],
    [1, 1, 0],
    [1, 0, 1],
    [1, 0, 0],
]
NINE_ROW_LABELS = [1, 0, 1, 0, 0, 1, 1, 0, 1]


def nine_row_table() -> InstanceTable:
    return make_table(NINE_ROW_CAT, NINE_ROW_LABELS)


__all__ = ["NINE_ROW_CAT", "NINE_ROW_LABELS", "nine_row_table", "make_table"]
