"""Pipeline trace: one event per access-point stage, inspectable by users."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

# Closed stage vocabulary. Document search emits the first four; in-document
# QA emits the rest ("dense-hop-<i>" carries the hop number).
SEARCH_STAGES = ("entities", "expansion", "plan", "retrieve")
QA_STAGES = ("chunking", "sparse", "dense-hop", "fusion", "rerank", "extract", "chain", "pack")


@dataclass(frozen=True)
class TraceEvent:
    ordinal: int
    stage: str
    payload: Any
    timestamp: float

    def to_record(self) -> dict:
        # timestamps are service metadata, not part of the exported record,
        # so identical runs export identical traces
        return {"ordinal": self.ordinal, "stage": self.stage, "payload": self.payload}


def _known_stage(stage: str) -> bool:
    if stage in SEARCH_STAGES:
        return True
    return any(stage == s or stage.startswith("dense-hop-") for s in QA_STAGES)


@dataclass
class Trace:
    """Ordered collector of TraceEvents; ordinals are contiguous from 1."""

    events: list[TraceEvent] = field(default_factory=list)

    def add(self, stage: str, payload: Any) -> TraceEvent:
        if not _known_stage(stage):
            raise ValueError(f"stage {stage!r} is not in the trace vocabulary")
        event = TraceEvent(
            ordinal=len(self.events) + 1,
            stage=stage,
            payload=payload,
            timestamp=time.time(),
        )
        self.events.append(event)
        return event

    def stages(self) -> list[str]:
        return [e.stage for e in self.events]

    def to_records(self) -> list[dict]:
        return [e.to_record() for e in self.events]
