from __future__ import annotations

import io
import json

import pytest

from llpbench.error_handlers import classify, error_envelope, exit_status_for, report_error
from llpbench.formats.validators import validate_payload
from llpbench.utils.errors import (
    ArtifactNotFoundError,
    ConfigurationError,
    DataValidationError,
    EmptyDataError,
    ErrorCode,
    ParseError,
    ProvenanceError,
    exit_status,
    make_error,
)
from llpbench.utils.logging import SafetyLimitExceeded


@pytest.mark.parametrize(
    ("exc", "code", "status"),
    [
        (ConfigurationError("bad flag"), ErrorCode.USAGE, 1),
        (DataValidationError("bad value"), ErrorCode.INVALID_DATA, 2),
        (ParseError("row 3", row=3), ErrorCode.INVALID_DATA, 2),
        (EmptyDataError("nothing left"), ErrorCode.INVALID_DATA, 2),
        (ArtifactNotFoundError("x.csv", "table"), ErrorCode.NOT_FOUND, 2),
        (ProvenanceError("stale", expected="a", actual="b"), ErrorCode.PROVENANCE, 3),
        (SafetyLimitExceeded("naive_instances", 5, 6), ErrorCode.INVALID_DATA, 2),
        (FileNotFoundError("gone"), ErrorCode.NOT_FOUND, 2),
        (RuntimeError("oops"), ErrorCode.INTERNAL, 2),
    ],
)
def test_classification_and_status(exc: BaseException, code: ErrorCode, status: int) -> None:
    assert classify(exc)[0] is code
    assert exit_status_for(exc) == status


def test_error_envelope_matches_schema() -> None:
    envelope = error_envelope(ProvenanceError("bags were built from another table", expected="a", actual="b"))

    assert envelope["code"] == "PROVENANCE"
    assert envelope["status"] == 3
    assert envelope["recovery"]
    assert validate_payload("error.v1.json", envelope) == (True, [])


def test_make_error_overrides() -> None:
    payload = make_error(ErrorCode.USAGE, "nope", recovery=[], status=9)

    assert payload == {"status": 9, "code": "USAGE", "message": "nope", "recovery": []}
    assert exit_status(ErrorCode.INTERNAL) == 2


def test_report_error_writes_single_json_line() -> None:
    stream = io.StringIO()

    status = report_error(DataValidationError("label must be 0 or 1"), stream=stream)

    assert status == 2
    lines = stream.getvalue().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["message"] == "label must be 0 or 1"


def test_exceptions_add_their_own_recovery_hints() -> None:
    stale = error_envelope(ProvenanceError("stale bags", expected="00ff", actual="abcd"))
    bad_row = error_envelope(ParseError("not a number", row=7))

    assert any("00ff" in hint and "abcd" in hint for hint in stale["recovery"])
    assert bad_row["recovery"][0].startswith("Inspect data row 7")
    assert error_envelope(RuntimeError("x"))["recovery"] == make_error(ErrorCode.INTERNAL)["recovery"]
