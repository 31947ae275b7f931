"""Unit tests for stage logging scopes and the naive-instance safety limit."""
from __future__ import annotations

import logging

import pytest

from llpbench.utils.logging import (
    SafetyLimitExceeded,
    current_stage,
    enforce_instance_limit,
    increment_counter,
    stage_scope,
)


def test_stage_scope_provides_context() -> None:
    logger = logging.getLogger("test.logger")
    with stage_scope("unit_test", logger=logger, extra={"dataset_id": "C1"}) as ctx:
        assert current_stage() is ctx
        increment_counter("example")
        increment_counter("example", 2)
        enforce_instance_limit(4, counter="pairs")
        assert ctx.counters == {"example": 3, "pairs": 4}
        assert ctx.extra()["dataset_id"] == "C1"
    assert current_stage() is None


def test_counters_without_scope_are_ignored() -> None:
    increment_counter("nothing")

    assert current_stage() is None


def test_instance_limit_enforced() -> None:
    with stage_scope("limit", max_naive_instances=3):
        enforce_instance_limit(3)
        with pytest.raises(SafetyLimitExceeded) as excinfo:
            enforce_instance_limit(4)

    assert excinfo.value.limit == 3
    assert excinfo.value.attempted == 4


def test_stage_scope_logs_start_and_finish(caplog: pytest.LogCaptureFixture) -> None:
    caplog.set_level(logging.INFO, logger="llpbench.stage")

    with stage_scope("bag"):
        pass

    messages = [record.getMessage() for record in caplog.records if record.name == "llpbench.stage"]
    assert messages == ["stage.start", "stage.finish"]
    assert caplog.records[-1].stage == "bag"


def test_stage_scope_logs_unexpected_errors(caplog: pytest.LogCaptureFixture) -> None:
    caplog.set_level(logging.ERROR, logger="llpbench.stage")

    with pytest.raises(RuntimeError):
        with stage_scope("boom"):
            raise RuntimeError("kaboom")

    assert any(record.getMessage() == "stage.error" for record in caplog.records)
