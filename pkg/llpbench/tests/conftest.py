"""Test configuration helpers to ensure package imports work from the repository root."""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
REPO_ROOT = ROOT.parent
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from llpbench.utils import audit  # noqa: E402


@pytest.fixture(autouse=True)
def _no_audit_log():
    previous = audit.get_audit_log_path()
    audit.set_audit_log_path(None)
    try:
        yield
    finally:
        audit.set_audit_log_path(previous)
