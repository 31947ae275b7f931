"""Centralized mapping from exceptions to error envelopes and exit statuses."""
from __future__ import annotations

import json
import logging
import sys
from typing import Dict, Optional, TextIO, Tuple

from .utils.errors import ErrorCode, LLPBenchError, exit_status, make_error
from .utils.logging import SafetyLimitExceeded

log = logging.getLogger(__name__)


def classify(exc: BaseException) -> Tuple[ErrorCode, str]:
    """Return the error code and message reported for *exc*."""

    if isinstance(exc, LLPBenchError):
        return exc.code, str(exc)
    if isinstance(exc, SafetyLimitExceeded):
        return ErrorCode.INVALID_DATA, str(exc)
    if isinstance(exc, json.JSONDecodeError):
        return ErrorCode.INVALID_DATA, f"invalid JSON: {exc.msg}"
    if isinstance(exc, FileNotFoundError):
        return ErrorCode.NOT_FOUND, str(exc)
    return ErrorCode.INTERNAL, f"{type(exc).__name__}: {exc}"


def error_envelope(exc: BaseException) -> Dict[str, object]:
    code, message = classify(exc)
    hints = exc.recovery() if isinstance(exc, LLPBenchError) else None
    return make_error(code, message, recovery=hints)


def exit_status_for(exc: BaseException) -> int:
    return exit_status(classify(exc)[0])


def report_error(
    exc: BaseException,
    *,
    debug: bool = False,
    stream: Optional[TextIO] = None,
) -> int:
    """Print the JSON envelope for *exc* to stderr and return the exit status."""

    envelope = error_envelope(exc)
    code = ErrorCode(envelope["code"])
    if code is ErrorCode.INTERNAL or debug:
        log.error("cli.failed", exc_info=exc, extra={"error_code": code.value})
    else:
        log.debug("cli.failed", extra={"error_code": code.value, "error_message": envelope["message"]})
    target = stream if stream is not None else sys.stderr
    target.write(json.dumps(envelope, sort_keys=True) + "\n")
    return int(envelope["status"])  # type: ignore[call-overload]


__all__ = ["classify", "error_envelope", "exit_status_for", "report_error"]
