"""Test selection switches read from the environment."""
from __future__ import annotations

from llpbench.utils.env import env_flag


def slow_tests_enabled() -> bool:
    """Large planted-data checks run only when ``LLPBENCH_SLOW_TESTS`` is truthy."""

    return env_flag("LLPBENCH_SLOW_TESTS")


__all__ = ["slow_tests_enabled"]
