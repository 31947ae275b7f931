"""Atomic, byte-stable artifact writers."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd

from .errors import ArtifactNotFoundError, DataValidationError
from .hex import fingerprint


def _plain(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_plain(item) for item in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return _plain(float(value))
    if isinstance(value, float) and not np.isfinite(value):
        # JSON has no infinities; the sentinel travels as a string.
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def dumps_json(payload: Any) -> str:
    """Serialise *payload* with sorted keys and a trailing newline."""

    return json.dumps(_plain(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def dumps_json_line(payload: Any) -> str:
    """Compact single-line form of :func:`dumps_json`, for JSONL logs."""

    return json.dumps(_plain(payload), sort_keys=True, allow_nan=False, default=str) + "\n"


def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """Write *data* to *path* via a temp file and ``os.replace``."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return target


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, payload: Any) -> Path:
    return atomic_write_text(path, dumps_json(payload))


def frame_csv_bytes(frame: pd.DataFrame) -> bytes:
    """Render *frame* as byte-stable CSV (``\\n`` endings, ``%.17g`` floats)."""

    return frame.to_csv(index=False, lineterminator="\n", float_format="%.17g").encode("utf-8")


def meta_path(path: str | Path) -> Path:
    target = Path(path)
    return target.with_name(target.stem + ".meta.json")


def write_frame(
    path: str | Path,
    frame: pd.DataFrame,
    *,
    config_hash: str,
    upstream: Mapping[str, str] | None = None,
) -> str:
    """Write a CSV table plus its ``<stem>.meta.json``; return the CSV fingerprint."""

    data = frame_csv_bytes(frame)
    digest = fingerprint(data)
    atomic_write_bytes(path, data)
    write_json(
        meta_path(path),
        {"config_hash": config_hash, "fingerprint": digest, "upstream": dict(upstream or {})},
    )
    return digest


def read_json(path: str | Path, *, what: str = "artifact") -> Any:
    source = Path(path)
    if not source.is_file():
        raise ArtifactNotFoundError(source, what)
    try:
        return json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{source}: invalid JSON ({exc.msg})") from exc


def require_file(path: str | Path, what: str = "artifact") -> Path:
    source = Path(path)
    if not source.is_file():
        raise ArtifactNotFoundError(source, what)
    return source


__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "dumps_json",
    "frame_csv_bytes",
    "meta_path",
    "read_json",
    "require_file",
    "write_json",
    "write_frame",
]
