from __future__ import annotations

import os
from pathlib import Path

import pytest

from llpbench.utils import env


@pytest.mark.parametrize(("raw", "expected"), [("1", True), (" Yes ", True), ("on", True), ("0", False), ("", False)])
def test_env_flag_values(monkeypatch: pytest.MonkeyPatch, raw: str, expected: bool) -> None:
    monkeypatch.setenv("LLPBENCH_TEST_FLAG", raw)

    assert env.env_flag("LLPBENCH_TEST_FLAG") is expected


def test_env_flag_default(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("LLPBENCH_TEST_FLAG", raising=False)

    assert env.env_flag("LLPBENCH_TEST_FLAG", default=True) is True


def test_load_env_reads_file_once_and_keeps_exported_values(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    dotenv = tmp_path / "bench.env"
    dotenv.write_text("LLPBENCH_TEST_A=from-file\nLLPBENCH_TEST_B=from-file\n", encoding="utf-8")
    monkeypatch.setenv("LLPBENCH_TEST_B", "exported")
    monkeypatch.setenv("LLPBENCH_TEST_A", "placeholder")
    monkeypatch.delenv("LLPBENCH_TEST_A")
    monkeypatch.setattr(env, "_attempted", False)
    monkeypatch.setattr(env, "_loaded_from", None)

    assert env.load_env(dotenv_path=dotenv) == dotenv
    assert env.load_env(dotenv_path=tmp_path / "other.env") == dotenv

    assert os.environ["LLPBENCH_TEST_A"] == "from-file"
    assert os.environ["LLPBENCH_TEST_B"] == "exported"
