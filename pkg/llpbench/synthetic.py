"""Planted-model tables for tests, smoke runs and reference experiments."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .stages.ingest import InstanceTable, Mode, Task
from .utils.errors import DataValidationError
from .utils.io import atomic_write_text, write_json


@dataclass(frozen=True)
class PlantedModel:
    cat_weights: Tuple[np.ndarray, ...]
    num_weights: np.ndarray

    def score(self, cat: np.ndarray, num: np.ndarray) -> np.ndarray:
        total = np.zeros(cat.shape[0])
        for column, weights in enumerate(self.cat_weights):
            total += weights[cat[:, column]]
        if num.size:
            total += num @ self.num_weights
        return total


def _draw(
    m: int, n_cat: int, vocab: int, n_num: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, PlantedModel]:
    if m < 2 or n_cat < 1 or vocab < 1 or n_num < 0:
        raise DataValidationError("planted tables need m >= 2, n_cat >= 1, vocab >= 1, n_num >= 0")
    cat = rng.integers(0, vocab, size=(m, n_cat))
    num = rng.uniform(0.0, 1.0, size=(m, n_num))
    model = PlantedModel(
        cat_weights=tuple(rng.standard_normal(vocab) for _ in range(n_cat)),
        num_weights=rng.standard_normal(n_num),
    )
    return cat, num, model


def _labels(score: np.ndarray, task: Task, noise: float, rng: np.random.Generator) -> np.ndarray:
    jitter = noise * rng.standard_normal(score.shape[0]) if noise else np.zeros(score.shape[0])
    if task is Task.BINARY:
        return (score + jitter > np.median(score)).astype(np.float64)
    return np.maximum(0.0, score - score.min()) + jitter


def planted_table(
    m: int,
    n_cat: int,
    vocab: int,
    *,
    n_num: int = 0,
    seed: int = 0,
    noise: float = 0.0,
    task: Task | str = Task.BINARY,
) -> InstanceTable:
    """Uniform categorical codes with a hidden additive weight per (column, code).

    With ``noise=0`` the binary labels are linearly separable in multihot space.
    """

    task = Task(task)
    rng = np.random.default_rng(seed)
    cat, num, model = _draw(m, n_cat, vocab, n_num, rng)
    labels = _labels(model.score(cat, num), task, noise, rng)
    return InstanceTable(
        cat=cat.astype(np.int64),
        num=num,
        labels=labels,
        vocab_sizes=tuple([vocab] * n_cat),
        cat_names=tuple(f"C{i + 1}" for i in range(n_cat)),
        num_names=tuple(f"I{i + 1}" for i in range(n_num)),
        mode=Mode.CTR if task is Task.BINARY else Mode.SSCL,
    )


def planted_schema(n_cat: int, n_num: int, task: Task | str = Task.BINARY) -> Dict[str, object]:
    columns: List[Dict[str, str]] = [{"name": "label", "kind": "label"}]
    columns += [{"name": f"I{i + 1}", "kind": "numerical"} for i in range(n_num)]
    columns += [{"name": f"C{i + 1}", "kind": "categorical"} for i in range(n_cat)]
    return {
        "columns": columns,
        "mode": "ctr" if Task(task) is Task.BINARY else "sscl",
        "header": False,
        "delimiter": "comma",
    }


def write_planted_csv(
    path: str | Path,
    m: int,
    n_cat: int,
    vocab: int,
    *,
    n_num: int = 0,
    seed: int = 0,
    noise: float = 0.0,
    task: Task | str = Task.BINARY,
) -> Path:
    """Write a raw planted CSV plus its ``<stem>.schema.json`` sidecar; return the sidecar path.

    Categorical values are written as ``<column>-<hex code>`` strings and numerical
    values as non-negative integers so both preprocessing regimes accept the file.
    Only the categoricals drive the label; numerical columns are noise.
    """

    task = Task(task)
    rng = np.random.default_rng(seed)
    cat, _, model = _draw(m, n_cat, vocab, 0, rng)
    num = rng.integers(0, 100, size=(m, n_num))
    score = model.score(cat, np.zeros((m, 0)))
    labels = _labels(score, task, noise, rng)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in range(m):
        label = str(int(labels[row])) if task is Task.BINARY else repr(float(labels[row]))
        writer.writerow(
            [label]
            + [str(int(value)) for value in num[row]]
            + [f"c{col + 1}-{int(code):x}" for col, code in enumerate(cat[row])]
        )
    target = Path(path)
    atomic_write_text(target, buffer.getvalue())
    sidecar = target.with_name(target.stem + ".schema.json")
    write_json(sidecar, planted_schema(n_cat, n_num, task))
    return sidecar


__all__ = ["PlantedModel", "planted_schema", "planted_table", "write_planted_csv"]
