from __future__ import annotations

from pathlib import Path

import pytest

from llpbench.tests._pipeline import encode_planted


@pytest.fixture
def encoded_table(tmp_path: Path) -> Path:
    return encode_planted(tmp_path / "planted")
