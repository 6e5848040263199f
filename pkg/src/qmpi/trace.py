"""Line-oriented operation trace.

One record per committed engine/fabric operation, written as::

    <seq> <rank> <kind> key="value" key="value" ...
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

KINDS = frozenset(
    {"alloc", "gate", "measure", "free", "epr", "ghz", "csend", "crecv",
     "flush", "barrier", "collective"}
)


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    rank: int
    kind: str
    details: dict = field(default_factory=dict)

    def format(self) -> str:
        parts = [str(self.seq), str(self.rank), self.kind]
        for key, value in self.details.items():
            text = str(value).replace("\\", "\\\\").replace('"', '\\"')
            parts.append(f'{key}="{text}"')
        return " ".join(parts)


class TraceLog:
    def __init__(self):
        self.records: list[TraceRecord] = []
        self._lock = threading.Lock()

    def emit(self, rank: int, kind: str, **details) -> TraceRecord:
        if kind not in KINDS:
            raise ValueError(f"unknown trace kind {kind!r}")
        with self._lock:
            rec = TraceRecord(len(self.records), rank, kind, details)
            self.records.append(rec)
            return rec

    def kinds(self, rank=None) -> list[str]:
        return [r.kind for r in self.records if rank is None or r.rank == rank]

    def dumps(self) -> str:
        return "".join(r.format() + "\n" for r in self.records)

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)
