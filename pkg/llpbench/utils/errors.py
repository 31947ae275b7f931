"""Error codes, exception types and the JSON error envelope.

Every failure the CLI reports maps to one :class:`ErrorCode`; the code fixes
the process exit status and supplies default recovery hints. Exceptions may
add hints of their own through :meth:`LLPBenchError.recovery`.
"""
from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple


class ErrorCode(str, Enum):
    USAGE = "USAGE"
    INVALID_DATA = "INVALID_DATA"
    NOT_FOUND = "NOT_FOUND"
    PROVENANCE = "PROVENANCE"
    INTERNAL = "INTERNAL"


class ErrorTemplate(NamedTuple):
    status: int
    message: str
    recovery: Tuple[str, ...] = ()


_TEMPLATES: Dict[ErrorCode, ErrorTemplate] = {
    ErrorCode.USAGE: ErrorTemplate(
        1, "Invalid command line or configuration.", ("Run with --help to see the accepted flags.",)
    ),
    ErrorCode.INVALID_DATA: ErrorTemplate(
        2, "Input data failed validation.", ("Check the input file against its schema sidecar.",)
    ),
    ErrorCode.NOT_FOUND: ErrorTemplate(
        2, "A required artifact is missing.", ("Run the upstream stage that produces the artifact first.",)
    ),
    ErrorCode.PROVENANCE: ErrorTemplate(
        3,
        "Artifact was produced from a different upstream input.",
        ("Regenerate the downstream artifact from the current table.",),
    ),
    ErrorCode.INTERNAL: ErrorTemplate(
        2, "Unexpected internal error.", ("Re-run with --debug and inspect the log output.",)
    ),
}


class LLPBenchError(Exception):
    """Base class for errors carrying a stable :class:`ErrorCode`."""

    code: ErrorCode = ErrorCode.INTERNAL

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    def recovery(self) -> List[str]:
        return list(_TEMPLATES[self.code].recovery)


class ConfigurationError(LLPBenchError, ValueError):
    """Invalid flags, config documents or a method/task mismatch."""

    code = ErrorCode.USAGE


class DataValidationError(LLPBenchError, ValueError):
    code = ErrorCode.INVALID_DATA


class ParseError(DataValidationError):
    """A malformed input row; ``row`` is the 0-based data row index."""

    def __init__(self, message: str, *, row: Optional[int] = None) -> None:
        super().__init__(message)
        self.row = row

    def recovery(self) -> List[str]:
        hints = super().recovery()
        if self.row is not None:
            hints.insert(0, f"Inspect data row {self.row} (0-based, header excluded).")
        return hints


class EmptyDataError(DataValidationError):
    """An operation needs data and none remains."""


class ProvenanceError(LLPBenchError):
    """An artifact's recorded upstream fingerprint differs from the input given."""

    code = ErrorCode.PROVENANCE

    def __init__(self, message: str, *, expected: str, actual: str) -> None:
        super().__init__(message)
        self.expected = expected
        self.actual = actual

    def recovery(self) -> List[str]:
        return super().recovery() + [
            f"The artifact records fingerprint {self.expected}; the input supplied has {self.actual}."
        ]


class ArtifactNotFoundError(LLPBenchError, FileNotFoundError):
    code = ErrorCode.NOT_FOUND

    def __init__(self, path: str | Path, what: str = "artifact") -> None:
        self.path = Path(path)
        self.what = what
        super().__init__(f"missing {what}: expected {self.path}")


def exit_status(code: ErrorCode) -> int:
    """Process exit status for *code*."""

    return _TEMPLATES[code].status


def make_error(
    code: ErrorCode,
    message: Optional[str] = None,
    *,
    recovery: Optional[Iterable[str]] = None,
    status: Optional[int] = None,
) -> Dict[str, object]:
    """Build the JSON error envelope; unset fields come from the code's template."""

    template = _TEMPLATES[code]
    return {
        "status": int(template.status if status is None else status),
        "code": code.value,
        "message": template.message if message is None else message,
        "recovery": list(template.recovery if recovery is None else recovery),
    }


__all__ = [
    "ArtifactNotFoundError",
    "ConfigurationError",
    "DataValidationError",
    "EmptyDataError",
    "ErrorCode",
    "ErrorTemplate",
    "LLPBenchError",
    "ParseError",
    "ProvenanceError",
    "exit_status",
    "make_error",
]
