"""Runtime configuration helpers for llpbench."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Final, List, Mapping, Optional, Sequence, Tuple

from .errors import ArtifactNotFoundError, ConfigurationError


def _parse_int(value: str | None, *, default: int) -> int:
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _parse_float(value: str | None, *, default: float) -> float:
    if value is None or not value.strip():
        return default
    try:
        return float(value)
    except ValueError:
        return default


def _env_int(name: str, *, default: int) -> int:
    return _parse_int(os.getenv(name), default=default)


def _env_float(name: str, *, default: float) -> float:
    return _parse_float(os.getenv(name), default=default)


LOW_THRESH: Final[int] = _env_int("LLPBENCH_LOW_THRESH", default=50)
HIGH_THRESH: Final[int] = _env_int("LLPBENCH_HIGH_THRESH", default=2500)
MIN_RETAIN: Final[float] = _env_float("LLPBENCH_MIN_RETAIN", default=0.30)
MAX_EPOCHS: Final[int] = _env_int("LLPBENCH_MAX_EPOCHS", default=50)
PATIENCE: Final[int] = _env_int("LLPBENCH_PATIENCE", default=3)
LEARNING_RATE: Final[float] = _env_float("LLPBENCH_LR", default=1e-5)
BAGS_PER_BATCH: Final[int] = _env_int("LLPBENCH_BAGS_PER_BATCH", default=8)
MAX_NAIVE_INSTANCES: Final[int] = _env_int("LLPBENCH_MAX_NAIVE_INSTANCES", default=5000)
DEFAULT_JOBS: Final[int] = _env_int("LLPBENCH_JOBS", default=1)

_audit_log_env = os.getenv("LLPBENCH_AUDIT_LOG", "").strip()
AUDIT_LOG_PATH: Final[Optional[Path]] = (
    Path(_audit_log_env).expanduser() if _audit_log_env else None
)

BAG_SIZES: Final[Tuple[int, ...]] = (64, 128, 256, 512)


def global_seed() -> int:
    """Return ``LLPBENCH_SEED`` read at call time (0 when unset or malformed)."""

    return _env_int("LLPBENCH_SEED", default=0)


@dataclass(frozen=True)
class Thresholds:
    low: int = LOW_THRESH
    high: int = HIGH_THRESH
    min_retain: float = MIN_RETAIN


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline document; CLI flags override individual fields."""

    inputs: Tuple[str, ...] = ()
    schema: Optional[str] = None
    mode: Optional[str] = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    keys: Tuple[str, ...] | str = "all-pairs"
    bag_sizes: Tuple[int, ...] = BAG_SIZES
    methods: Tuple[str, ...] = ("dllp-bce",)
    seeds: Tuple[int, ...] = (0,)
    output_dir: str = "out"

    def with_overrides(self, **changes: Any) -> "PipelineConfig":
        present = {key: value for key, value in changes.items() if value is not None}
        return replace(self, **present)

    def to_dict(self) -> dict[str, object]:
        return {
            "inputs": list(self.inputs),
            "schema": self.schema,
            "mode": self.mode,
            "thresholds": {
                "low": self.thresholds.low,
                "high": self.thresholds.high,
                "min_retain": self.thresholds.min_retain,
            },
            "keys": self.keys if isinstance(self.keys, str) else list(self.keys),
            "bag_sizes": list(self.bag_sizes),
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }


def _as_tuple(value: object, default: Sequence[Any]) -> Tuple[Any, ...]:
    if value is None:
        return tuple(default)
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def pipeline_config_from_mapping(payload: Mapping[str, Any]) -> PipelineConfig:
    """Build a :class:`PipelineConfig` from an already validated mapping."""

    from ..formats.validators import validate_payload

    valid, errors = validate_payload("pipeline_config.v1.json", dict(payload))
    if not valid:
        raise ConfigurationError("; ".join(errors))

    raw_thresholds = payload.get("thresholds") or {}
    thresholds = Thresholds(
        low=int(raw_thresholds.get("low", LOW_THRESH)),
        high=int(raw_thresholds.get("high", HIGH_THRESH)),
        min_retain=float(raw_thresholds.get("min_retain", MIN_RETAIN)),
    )
    if thresholds.low > thresholds.high:
        raise ConfigurationError(
            f"thresholds.low ({thresholds.low}) exceeds thresholds.high ({thresholds.high})"
        )
    keys_raw = payload.get("keys", "all-pairs")
    keys: Tuple[str, ...] | str = keys_raw if isinstance(keys_raw, str) else tuple(keys_raw)
    return PipelineConfig(
        inputs=_as_tuple(payload.get("inputs"), ()),
        schema=payload.get("schema"),
        mode=payload.get("mode"),
        thresholds=thresholds,
        keys=keys,
        bag_sizes=tuple(int(q) for q in _as_tuple(payload.get("bag_sizes"), BAG_SIZES)),
        methods=tuple(str(m) for m in _as_tuple(payload.get("methods"), ("dllp-bce",))),
        seeds=tuple(int(s) for s in _as_tuple(payload.get("seeds"), (global_seed(),))),
        output_dir=str(payload.get("output_dir", "out")),
    )


def load_pipeline_config(path: str | Path | None) -> PipelineConfig:
    """Load a pipeline config file; ``None`` yields environment defaults."""

    if path is None:
        return PipelineConfig(seeds=(global_seed(),))
    config_path = Path(path)
    if not config_path.is_file():
        raise ArtifactNotFoundError(config_path, "pipeline config")
    try:
        payload = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{config_path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{config_path}: config must be a JSON object")
    return pipeline_config_from_mapping(payload)


def split_csv_option(value: str | None) -> List[str]:
    """Split a ``a,b,c`` flag value, dropping empty entries."""

    if not value:
        return []
    return [part.strip() for part in value.split(",") if part.strip()]


__all__ = [
    "AUDIT_LOG_PATH",
    "BAGS_PER_BATCH",
    "BAG_SIZES",
    "DEFAULT_JOBS",
    "HIGH_THRESH",
    "LEARNING_RATE",
    "LOW_THRESH",
    "MAX_EPOCHS",
    "MAX_NAIVE_INSTANCES",
    "MIN_RETAIN",
    "PATIENCE",
    "PipelineConfig",
    "Thresholds",
    "global_seed",
    "load_pipeline_config",
    "pipeline_config_from_mapping",
    "split_csv_option",
]
