"""Two-hidden-layer MLP over multihot inputs with manual gradients and Adam."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from ..formats.validators import require_valid
from ..utils.errors import DataValidationError
from ..utils.io import atomic_write_bytes, require_file
from .ingest import InstanceTable

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN: Tuple[int, int] = (128, 64)
BLOCK_NAMES: Tuple[str, ...] = ("W1", "b1", "W2", "b2", "w_out", "b_out")
LOGIT_CLAMP = 30.0
CHECKPOINT_FORMAT = "llpbench.checkpoint.v1"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Head(str, Enum):
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


@dataclass
class ModelParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self) -> None:
        h1, d = self.W1.shape
        h2 = self.W2.shape[0]
        expected = {
            "b1": (h1,),
            "W2": (h2, h1),
            "b2": (h2,),
            "w_out": (h2,),
            "b_out": (1,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DataValidationError(
                    f"parameter {name} has shape {getattr(self, name).shape}, expected {shape}"
                )

    @property
    def input_dim(self) -> int:
        return int(self.W1.shape[1])

    @property
    def hidden(self) -> Tuple[int, int]:
        return int(self.W1.shape[0]), int(self.W2.shape[0])

    def blocks(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in BLOCK_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "ModelParams":
        return ModelParams(**{name: block.copy() for name, block in self.blocks()})

    @classmethod
    def zeros_like(cls, other: "ModelParams") -> "ModelParams":
        return cls(**{name: np.zeros_like(block) for name, block in other.blocks()})

    def all_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(block))) for _, block in self.blocks())


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m=ModelParams.zeros_like(params), v=ModelParams.zeros_like(params))


@dataclass(frozen=True)
class ForwardCache:
    x: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    logits: np.ndarray
    preds: np.ndarray
    head: Head


def input_dim(table: InstanceTable) -> int:
    return int(sum(table.vocab_sizes)) + table.n_num


def _offsets(vocab_sizes: Sequence[int]) -> np.ndarray:
    sizes = np.asarray(vocab_sizes, dtype=np.int64)
    if not sizes.size:
        return sizes
    return np.concatenate(([0], np.cumsum(sizes)[:-1]))


def multihot_encode(
    codes: Sequence[int],
    vocab_sizes: Sequence[int],
    numerics: Sequence[float] = (),
) -> np.ndarray:
    """One-hot block per categorical column followed by the numerical values."""

    if len(codes) != len(vocab_sizes):
        raise DataValidationError(
            f"got {len(codes)} categorical codes for {len(vocab_sizes)} columns"
        )
    vector = np.zeros(int(sum(vocab_sizes)) + len(numerics), dtype=np.float64)
    for column, (code, offset, size) in enumerate(zip(codes, _offsets(vocab_sizes), vocab_sizes)):
        if not 0 <= int(code) < int(size):
            raise DataValidationError(
                f"code {code} out of vocabulary (size {size}) in column {column}"
            )
        vector[int(offset) + int(code)] = 1.0
    vector[int(sum(vocab_sizes)) :] = np.asarray(numerics, dtype=np.float64)
    return vector


def multihot_batch(table: InstanceTable, indices: Sequence[int] | np.ndarray) -> np.ndarray:
    """Dense ``(len(indices), D)`` multihot matrix for rows of *table*."""

    idx = np.asarray(indices, dtype=np.int64)
    n_onehot = int(sum(table.vocab_sizes))
    out = np.zeros((idx.size, n_onehot + table.n_num), dtype=np.float64)
    if table.n_cat and idx.size:
        out[np.arange(idx.size)[:, None], table.cat[idx] + _offsets(table.vocab_sizes)] = 1.0
    if table.n_num:
        out[:, n_onehot:] = table.num[idx]
    return out


def init_params(seed: int, dim: int, hidden: Sequence[int] = DEFAULT_HIDDEN) -> ModelParams:
    """He-uniform fan-in initialisation with zero biases."""

    if dim < 1:
        raise DataValidationError(f"input dimension must be >= 1, got {dim}")
    h1, h2 = (int(size) for size in hidden)
    rng = np.random.default_rng(seed)

    def he_uniform(rows: int, fan_in: int) -> np.ndarray:
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=(rows, fan_in))

    return ModelParams(
        W1=he_uniform(h1, dim),
        b1=np.zeros(h1),
        W2=he_uniform(h2, h1),
        b2=np.zeros(h2),
        w_out=he_uniform(1, h2)[0],
        b_out=np.zeros(1),
    )


def sigmoid(values: np.ndarray) -> np.ndarray:
    return np.where(
        values >= 0,
        1.0 / (1.0 + np.exp(-np.abs(values))),
        np.exp(-np.abs(values)) / (1.0 + np.exp(-np.abs(values))),
    )


def forward(
    params: ModelParams, x: np.ndarray, head: Head | str = Head.SIGMOID
) -> Tuple[np.ndarray, ForwardCache]:
    head = Head(head)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.input_dim:
        raise DataValidationError(
            f"input dimension {x.shape[1]} does not match model dimension {params.input_dim}"
        )
    z1 = x @ params.W1.T + params.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.W2.T + params.b2
    h2 = np.maximum(z2, 0.0)
    logits = h2 @ params.w_out + params.b_out[0]
    if head is Head.SIGMOID:
        # Clamped so predictions stay strictly inside (0, 1).
        preds = sigmoid(np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP))
    else:
        preds = logits.copy()
    return preds, ForwardCache(x, z1, h1, z2, h2, logits, preds, head)


def backward(
    params: ModelParams,
    cache: ForwardCache,
    d_pred: Optional[np.ndarray] = None,
    *,
    d_logit: Optional[np.ndarray] = None,
) -> ModelParams:
    """Parameter gradients given upstream gradients w.r.t. predictions or logits."""

    if d_logit is None:
        if d_pred is None:
            raise ValueError("backward needs d_pred or d_logit")
        d_pred = np.asarray(d_pred, dtype=np.float64)
        if cache.head is Head.SIGMOID:
            inside = np.abs(cache.logits) < LOGIT_CLAMP
            d_logit = d_pred * cache.preds * (1.0 - cache.preds) * inside
        else:
            d_logit = d_pred
    d_logit = np.asarray(d_logit, dtype=np.float64)
    d_w_out = cache.h2.T @ d_logit
    d_b_out = np.array([d_logit.sum()])
    d_z2 = np.outer(d_logit, params.w_out) * (cache.z2 > 0)
    d_W2 = d_z2.T @ cache.h1
    d_b2 = d_z2.sum(axis=0)
    d_z1 = (d_z2 @ params.W2) * (cache.z1 > 0)
    d_W1 = d_z1.T @ cache.x
    d_b1 = d_z1.sum(axis=0)
    return ModelParams(W1=d_W1, b1=d_b1, W2=d_W2, b2=d_b2, w_out=d_w_out, b_out=d_b_out)


def adam_step(
    params: ModelParams, grads: ModelParams, state: AdamState, lr: float
) -> Tuple[ModelParams, AdamState]:
    """Bias-corrected Adam update applied in place; returns the same objects."""

    state.t += 1
    correction1 = 1.0 - ADAM_BETA1**state.t
    correction2 = 1.0 - ADAM_BETA2**state.t
    for name, param in params.blocks():
        grad = getattr(grads, name)
        if grad.shape != param.shape:
            raise DataValidationError(f"gradient {name} has shape {grad.shape}, expected {param.shape}")
        m = getattr(state.m, name)
        v = getattr(state.v, name)
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * grad
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * grad * grad
        param -= lr * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)
    return params, state


@dataclass(frozen=True)
class Checkpoint:
    params: ModelParams
    seed: int
    step: int
    header: Dict[str, object] = field(default_factory=dict)


def _checkpoint_header(params: ModelParams, seed: int, step: int) -> Dict[str, object]:
    return {
        "format": CHECKPOINT_FORMAT,
        "input_dim": params.input_dim,
        "hidden": list(params.hidden),
        "seed": int(seed),
        "step": int(step),
        "blocks": [{"name": name, "shape": list(block.shape)} for name, block in params.blocks()],
    }


def save_checkpoint(path: str | Path, params: ModelParams, *, seed: int, step: int) -> Path:
    """Header length (u64 LE), JSON header, then f64 LE blocks in ``BLOCK_NAMES`` order."""

    header = json.dumps(_checkpoint_header(params, seed, step), sort_keys=True).encode("utf-8")
    payload = [np.array([len(header)], dtype="<u8").tobytes(), header]
    payload.extend(np.ascontiguousarray(block, dtype="<f8").tobytes() for _, block in params.blocks())
    return atomic_write_bytes(path, b"".join(payload))


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = require_file(path, "checkpoint").read_bytes()
    if len(data) < 8:
        raise DataValidationError(f"{path}: checkpoint truncated")
    header_len = int(np.frombuffer(data[:8], dtype="<u8")[0])
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"{path}: unreadable checkpoint header") from exc
    require_valid("checkpoint_header.v1.json", header, source=str(path))
    if [block["name"] for block in header["blocks"]] != list(BLOCK_NAMES):
        raise DataValidationError(f"{path}: unexpected parameter block layout")
    offset = 8 + header_len
    blocks: Dict[str, np.ndarray] = {}
    for entry in header["blocks"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise DataValidationError(f"{path}: checkpoint truncated in block {entry['name']}")
        blocks[entry["name"]] = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise DataValidationError(f"{path}: trailing bytes after parameter blocks")
    return Checkpoint(
        params=ModelParams(**blocks),
        seed=int(header["seed"]),
        step=int(header["step"]),
        header=header,
    )


__all__ = [
    "AdamState",
    "BLOCK_NAMES",
    "Checkpoint",
    "DEFAULT_HIDDEN",
    "ForwardCache",
    "Head",
    "LOGIT_CLAMP",
    "ModelParams",
    "adam_step",
    "backward",
    "forward",
    "init_params",
    "input_dim",
    "load_checkpoint",
    "multihot_batch",
    "multihot_encode",
    "save_checkpoint",
    "sigmoid",
]
