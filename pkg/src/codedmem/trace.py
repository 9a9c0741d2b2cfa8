"""Execution traces and their JSON-lines form.

The first line of a trace file is ``{"event": "config", ...}`` holding the
scenario; every following line is one event with a strictly increasing
``seq``. Serialization is canonical (sorted keys, no whitespace) so equal
runs give byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import TraceIntegrityError


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ExecutionTrace:
    config: dict
    events: list[dict] = field(default_factory=list)

    def of(self, kind: str):
        return [e for e in self.events if e["event"] == kind]

    @property
    def halt(self) -> dict | None:
        return self.events[-1] if self.events and self.events[-1]["event"] == "halt" else None

    def to_jsonl(self) -> str:
        lines = [dumps({"event": "config", "seq": 0, "config": self.config})]
        lines.extend(dumps(e) for e in self.events)
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "ExecutionTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise TraceIntegrityError("empty trace")
        try:
            records = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as exc:
            raise TraceIntegrityError(f"malformed trace line: {exc}") from None
        head = records[0]
        if head.get("event") != "config":
            raise TraceIntegrityError("first trace line must be the config event")
        events = records[1:]
        last = 0
        for e in events:
            if "event" not in e or "seq" not in e:
                raise TraceIntegrityError(f"event without 'event'/'seq': {e}")
            if e["seq"] <= last:
                raise TraceIntegrityError(f"seq not increasing at {e['seq']}")
            last = e["seq"]
        return cls(head["config"], events)

    @classmethod
    def read(cls, path) -> "ExecutionTrace":
        return cls.from_jsonl(Path(path).read_text())
