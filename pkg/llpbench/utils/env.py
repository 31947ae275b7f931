"""Process environment: the optional ``.env`` file and boolean flags."""
from __future__ import annotations

import os
from pathlib import Path
from typing import Final, Optional

from dotenv import find_dotenv, load_dotenv

_TRUTHY: Final[frozenset[str]] = frozenset({"1", "true", "yes", "on"})

_loaded_from: Optional[Path] = None
_attempted = False


def load_env(*, dotenv_path: Optional[str | Path] = None) -> Optional[Path]:
    """Read ``LLPBENCH_*`` defaults from a dotenv file, at most once per process.

    The file is *dotenv_path*, else ``$LLPBENCH_ENV_FILE``, else the nearest
    ``.env`` above the working directory. Variables already exported win,
    so ``LLPBENCH_SEED=7 llpbench bag ...`` overrides the file. Returns the
    file that was read, if any.
    """

    global _loaded_from, _attempted
    if _attempted:
        return _loaded_from
    _attempted = True

    candidate = dotenv_path or os.getenv("LLPBENCH_ENV_FILE") or find_dotenv(usecwd=True)
    if candidate and Path(candidate).is_file():
        load_dotenv(dotenv_path=candidate, override=False)
        _loaded_from = Path(candidate)
    return _loaded_from


def env_flag(name: str, *, default: bool = False) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in _TRUTHY


__all__ = ["env_flag", "load_env"]
