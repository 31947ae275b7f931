"""Append-only JSONL record of CLI stage executions.

Disabled unless ``LLPBENCH_AUDIT_LOG`` is set (or a path is installed with
:func:`set_audit_log_path`). A failing write is logged and never breaks the
command that triggered it.
"""
from __future__ import annotations

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

from .config import AUDIT_LOG_PATH
from .io import dumps_json_line
from .logging import current_stage

logger = logging.getLogger("llpbench.audit")


class _AuditSink:
    def __init__(self, path: Optional[Path]) -> None:
        self.path = path

    def append(self, entry: Mapping[str, Any]) -> None:
        if self.path is None:
            logger.debug("audit.skip", extra={"command": entry.get("command")})
            return
        line = dumps_json_line(entry)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line)
        except OSError:
            logger.exception("audit.write_failed", extra={"path": str(self.path)})


_sink = _AuditSink(AUDIT_LOG_PATH)


def set_audit_log_path(path: Path | str | None) -> None:
    _sink.path = Path(path).expanduser() if path is not None else None


def get_audit_log_path() -> Optional[Path]:
    return _sink.path


def record_stage_event(
    *,
    command: str,
    parameters: Mapping[str, Any],
    outputs: Sequence[str | Path],
    ok: bool,
    error: Optional[Mapping[str, Any]] = None,
) -> None:
    """Append one entry for a finished (or failed) CLI command.

    Inside a stage scope the entry also carries the run id, stage metadata
    and counters.
    """

    entry: Dict[str, Any] = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "ok": bool(ok),
        "parameters": dict(parameters),
        "outputs": [str(path) for path in outputs],
    }
    stage = current_stage()
    if stage is not None:
        entry.update(stage.snapshot())
    if error:
        entry["error"] = dict(error)
    _sink.append(entry)


__all__ = ["get_audit_log_path", "record_stage_event", "set_audit_log_path"]
