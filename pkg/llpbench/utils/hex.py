"""Hex fingerprint helpers shared across stages."""
from __future__ import annotations

import json
from typing import Any, Mapping

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """Return the 64-bit FNV-1a hash of *data*."""

    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & _MASK
    return value


def int_to_hex(value: int) -> str:
    """Return the canonical 16-digit hex form of a 64-bit fingerprint."""

    return f"{value & _MASK:016x}"


def fingerprint(data: bytes) -> str:
    """Fingerprint raw artifact bytes."""

    return int_to_hex(fnv1a_64(data))


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: Mapping[str, Any]) -> str:
    """Fingerprint a configuration mapping via its canonical JSON form."""

    return fingerprint(canonical_json(dict(config)).encode("utf-8"))


__all__ = ["canonical_json", "config_hash", "fingerprint", "fnv1a_64", "int_to_hex"]
