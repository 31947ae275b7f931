"""Validation of llpbench artifacts and config documents against the bundled schemas."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any, Dict, List, Mapping, Tuple

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError
from referencing import Registry, Resource
from referencing.jsonschema import DRAFT202012

from ..utils.errors import DataValidationError

_PACKAGE = "llpbench.formats.schemas"


class SchemaCatalog:
    """Every ``*.json`` schema in the package, cross-referenceable by ``$id``."""

    def __init__(self, documents: Mapping[str, Dict[str, Any]]) -> None:
        self._documents = dict(documents)
        resources_by_id = [
            (doc["$id"], Resource.from_contents(doc, default_specification=DRAFT202012)) for doc in self._documents.values() if "$id" in doc
        ]
        self._registry: Registry = Registry().with_resources(resources_by_id)
        self._validators: Dict[str, Draft202012Validator] = {}

    @classmethod
    def from_package(cls) -> "SchemaCatalog":
        documents: Dict[str, Dict[str, Any]] = {}
        for entry in sorted(resources.files(_PACKAGE).iterdir(), key=lambda item: item.name):
            if entry.name.endswith(".json"):
                documents[entry.name] = json.loads(entry.read_text(encoding="utf-8"))
        return cls(documents)

    def names(self) -> List[str]:
        return sorted(self._documents)

    def validator(self, name: str) -> Draft202012Validator:
        if name not in self._validators:
            try:
                schema = self._documents[name]
            except KeyError:
                raise KeyError(f"unknown schema {name!r}; known: {', '.join(self.names())}") from None
            self._validators[name] = Draft202012Validator(schema, registry=self._registry)
        return self._validators[name]


@lru_cache(maxsize=1)
def catalog() -> SchemaCatalog:
    return SchemaCatalog.from_package()


def _describe(error: ValidationError) -> str:
    pointer = "/".join(str(part) for part in error.absolute_path)
    return f"{pointer}: {error.message}" if pointer else error.message


def validate_payload(schema_name: str, payload: Any) -> Tuple[bool, List[str]]:
    """Check *payload*; the messages are ordered by location so output is stable."""

    found = catalog().validator(schema_name).iter_errors(payload)
    messages = [_describe(error) for error in sorted(found, key=lambda e: [str(p) for p in e.absolute_path])]
    return not messages, messages


def require_valid(schema_name: str, payload: Any, *, source: str = "payload") -> None:
    """Raise :class:`DataValidationError` naming *source* when *payload* is invalid."""

    ok, messages = validate_payload(schema_name, payload)
    if not ok:
        raise DataValidationError(f"{source}: " + "; ".join(messages))


__all__ = ["SchemaCatalog", "catalog", "require_valid", "validate_payload"]
