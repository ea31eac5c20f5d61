from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from functools import singledispatch
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import numpy as np
from pydantic import BaseModel, Field

TRACE_FILE = "trace.jsonl"
_TRUE = {"1", "true", "yes", "on"}


@singledispatch
def json_safe(value: Any) -> Any:
    if hasattr(value, "model_dump"):
        return json_safe(value.model_dump())
    return str(value)


@json_safe.register(type(None))
@json_safe.register(str)
@json_safe.register(int)
@json_safe.register(float)
@json_safe.register(bool)
def _(value):
    return value


@json_safe.register(np.generic)
def _(value):
    return value.item()


@json_safe.register(np.ndarray)
def _(value):
    return value.tolist()


@json_safe.register(Path)
def _(value):
    return str(value)


@json_safe.register(dict)
def _(value):
    return {str(k): json_safe(v) for k, v in value.items()}


@json_safe.register(list)
@json_safe.register(tuple)
@json_safe.register(set)
def _(value):
    return [json_safe(v) for v in value]


class RunSession(BaseModel):
    id: str
    command: str
    path: Path
    started: float = Field(default_factory=time.monotonic)

    def elapsed(self) -> float:
        return round(time.monotonic() - self.started, 6)


class TraceEvent(BaseModel):
    event: str
    session_id: str
    ts: str
    elapsed_s: float
    details: Dict[str, Any] = Field(default_factory=dict)


def trace_enabled_from_env() -> bool:
    value = os.getenv("BISFORMER_TRACE_ENABLED")
    return value is None or value.strip().lower() in _TRUE


class RunTracer:
    """Append-only JSONL record of one command run: stages, epoch losses, stream latencies.

    Every line carries the seconds since the session started. Traces are diagnostic;
    nothing else reads them back.
    """

    def __init__(self, output_dir: Optional[str | Path] = None, enabled: Optional[bool] = None) -> None:
        wanted = trace_enabled_from_env() if enabled is None else enabled
        self.path = Path(output_dir).expanduser() / TRACE_FILE if output_dir is not None else None
        self.enabled = wanted and self.path is not None

    def start_session(self, command: str, metadata: Optional[Dict[str, Any]] = None) -> Optional[RunSession]:
        if not self.enabled:
            return None
        stamp = datetime.now(timezone.utc).strftime('%Y%m%d-%H%M%S-%f')
        session = RunSession(id=f"{command}-{stamp}", command=command, path=self.path)
        self.log_event(session, "session_start", {"command": command, "config": metadata or {}})
        return session

    def log_event(self, session: Optional[RunSession], event_name: str, details: Optional[Dict[str, Any]] = None) -> None:
        if not self.enabled or session is None:
            return
        record = TraceEvent(
            event=event_name,
            session_id=session.id,
            ts=datetime.now(timezone.utc).isoformat(),
            elapsed_s=session.elapsed(),
            details=json_safe(details or {}),
        )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as trace_file:
            trace_file.write(json.dumps(record.model_dump(), ensure_ascii=False) + "\n")

    @contextmanager
    def stage(self, session: Optional[RunSession], name: str) -> Iterator[Dict[str, Any]]:
        """Times a block; details added to the yielded dict land on the `stage` event."""
        details: Dict[str, Any] = {}
        started = time.perf_counter()
        try:
            yield details
        finally:
            self.log_event(session, "stage", {"stage": name, "duration_s": time.perf_counter() - started, **details})
