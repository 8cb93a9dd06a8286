"""Multimodal packet ingestion and the fused timeline.

Any number of producers may call `ingest` concurrently; a single consumer
drives `flush`, which synchronizes device timestamps, orders records by
(unified_ts, source_id, arrival sequence), and commits them to the
append-only timeline.  Packets arriving after their neighborhood has been
committed (beyond the 500 ms reordering horizon) are dropped and counted.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from ..records import Modality, SensorPacket, payload_to_dict
from .clock import ClockModel, synchronize

REORDER_HORIZON_MS = 500


@dataclass
class IngestAck:
    accepted: bool
    reason: Optional[str] = None


@dataclass
class TimelineRecord:
    ts_ms: int
    source_id: str
    modality: Modality
    payload: Any
    arrival_seq: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ts_ms": self.ts_ms,
            "source": self.source_id,
            "modality": self.modality.value,
            "payload": payload_to_dict(SensorPacket(self.source_id, self.modality, self.ts_ms, self.payload)),
        }


class FusedTimeline:
    """Append-only record list with nondecreasing unified timestamps."""

    def __init__(self) -> None:
        self._records: List[TimelineRecord] = []

    def append(self, record: TimelineRecord) -> None:
        if self._records and record.ts_ms < self._records[-1].ts_ms:
            raise ValueError("timeline timestamps must be nondecreasing")
        self._records.append(record)

    @property
    def records(self) -> List[TimelineRecord]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def by_modality(self, modality: Modality) -> List[TimelineRecord]:
        return [r for r in self._records if r.modality == modality]

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self._records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


class Gateway:
    """Ingestion front end: clock registry, validation, reordering, fusion."""

    def __init__(self, reorder_horizon_ms: int = REORDER_HORIZON_MS):
        self._clocks: Dict[str, ClockModel] = {}
        self._pending: List[tuple] = []
        self._lock = threading.Lock()
        self._arrival_counter = 0
        self._horizon = reorder_horizon_ms
        self._max_seen_ts: Optional[int] = None
        self.timeline = FusedTimeline()
        self.metrics: Dict[str, int] = {
            "ingested": 0,
            "rejected_malformed": 0,
            "late_dropped": 0,
            "committed": 0,
        }

    def register_clock(self, source_id: str, clock: Optional[ClockModel] = None) -> None:
        self._clocks[source_id] = clock or ClockModel()

    def clock_for(self, source_id: str) -> ClockModel:
        if source_id not in self._clocks:
            raise KeyError(f"no clock registered for source {source_id!r}")
        return self._clocks[source_id]

    def unified_ts(self, packet: SensorPacket) -> int:
        return synchronize(packet.device_timestamp, self.clock_for(packet.source_id))

    def ingest(self, packet: SensorPacket) -> IngestAck:
        """Queue one packet; safe under concurrent producers."""
        reason = packet.well_formed()
        if reason is not None:
            with self._lock:
                self.metrics["rejected_malformed"] += 1
            return IngestAck(accepted=False, reason=reason)
        unified = self.unified_ts(packet)
        with self._lock:
            seq = self._arrival_counter
            self._arrival_counter += 1
            self._pending.append((unified, packet.source_id, seq, packet))
            self.metrics["ingested"] += 1
            if self._max_seen_ts is None or unified > self._max_seen_ts:
                self._max_seen_ts = unified
        return IngestAck(accepted=True)

    def flush(self, final: bool = False) -> int:
        """Commit reordered packets to the timeline; returns records committed.

        Without `final`, packets newer than (max seen - horizon) stay buffered
        so that stragglers within the horizon can still be interleaved.
        """
        with self._lock:
            pending = self._pending
            self._pending = []
            max_seen = self._max_seen_ts
        if not pending and not final:
            return 0
        pending.sort(key=lambda item: (item[0], item[1], item[2]))

        committed = 0
        keep: List[tuple] = []
        cutoff = None if final or max_seen is None else max_seen - self._horizon
        last_ts = self.timeline.records[-1].ts_ms if len(self.timeline) else None
        for unified, source_id, seq, packet in pending:
            if cutoff is not None and unified > cutoff:
                keep.append((unified, source_id, seq, packet))
                continue
            if last_ts is not None and unified < last_ts:
                self.metrics["late_dropped"] += 1
                continue
            self.timeline.append(TimelineRecord(unified, source_id, packet.modality, packet.payload, seq))
            last_ts = unified
            committed += 1
        if keep:
            with self._lock:
                self._pending = keep + self._pending
        self.metrics["committed"] += committed
        return committed
