"""Execution traces: typed records, round stats, and the byte-stable export.

Every simulator observation lands in one flat record stream.  The export
serializes the canonical eight fields as line-delimited JSON with a fixed
key order, so identical runs produce identical bytes; richer auditing data
rides along in ``extra`` and is not exported.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

__all__ = ["ExecutionTrace", "RoundStats", "TraceRecord"]

EXPORT_FIELDS = ("time", "from", "to", "kind", "term", "wclock", "weight", "index")


@dataclass(frozen=True)
class TraceRecord:
    time: float
    kind: str
    frm: int | None = None
    to: int | None = None
    term: int | None = None
    wclock: int | None = None
    weight: float | None = None
    index: int | None = None
    extra: dict[str, Any] | None = None

    def export(self) -> str:
        return json.dumps(
            {
                "time": self.time,
                "from": self.frm,
                "to": self.to,
                "kind": self.kind,
                "term": self.term,
                "wclock": self.wclock,
                "weight": self.weight,
                "index": self.index,
            }
        )


@dataclass
class RoundStats:
    """Per-round bookkeeping the harness turns into metrics rows."""

    round: int  # client-round ordinal; 0 for configuration rounds
    wclock: int
    leader_id: int
    start_time: float
    batch_size: int
    cabinet_ids: tuple[int, ...]
    regime: str
    crashed_count: int
    kind: str = "client"
    commit_time: float | None = None
    finalize_time: float | None = None
    replies_at_commit: int = 0

    @property
    def committed(self) -> bool:
        return self.commit_time is not None

    @property
    def commit_latency_ms(self) -> float | None:
        if self.commit_time is None:
            return None
        return self.commit_time - self.start_time

    @property
    def wall_time_ms(self) -> float | None:
        if self.finalize_time is None:
            return None
        return self.finalize_time - self.start_time


@dataclass
class ExecutionTrace:
    algo: str
    n: int
    t: int
    seed: int
    records: list[TraceRecord] = field(default_factory=list)
    rounds: list[RoundStats] = field(default_factory=list)
    schemes: dict[int, tuple[float, ...]] = field(default_factory=dict)  # epoch -> weights
    meta: dict[str, Any] = field(default_factory=dict)

    def add(self, record: TraceRecord) -> None:
        self.records.append(record)

    def of_kind(self, *kinds: str) -> Iterator[TraceRecord]:
        wanted = set(kinds)
        return (r for r in self.records if r.kind in wanted)

    def committed_rounds(self) -> list[RoundStats]:
        return [r for r in self.rounds if r.committed]

    def client_rounds(self) -> list[RoundStats]:
        return [r for r in self.rounds if r.kind == "client"]

    def export_lines(self) -> str:
        return "\n".join(r.export() for r in self.records) + "\n"

    def assignments_by_wclock(self) -> dict[int, dict[int, float]]:
        out: dict[int, dict[int, float]] = {}
        for rec in self.of_kind("assign"):
            out.setdefault(rec.wclock, {})[rec.frm] = rec.weight
        return out

    def reply_arrivals(self, wclock: int) -> list[tuple[float, int, float]]:
        """Successful reply arrivals (time, node, weight) for one round."""
        return [
            (rec.time, rec.frm, rec.weight)
            for rec in self.of_kind("reply")
            if rec.wclock == wclock
        ]
