from .clock import ClockModel, synchronize
from .contact import find_contact_intervals, count_strides
from .fusion import Gateway, FusedTimeline, TimelineRecord, IngestAck
from .segment import (
    GaitSegment,
    SegmentFlags,
    FilterDecision,
    RejectReason,
    edge_case_filter,
    pair_pressure_streams,
    detect_bouts,
    segment_walks,
)

__all__ = [
    "ClockModel",
    "synchronize",
    "find_contact_intervals",
    "count_strides",
    "Gateway",
    "FusedTimeline",
    "TimelineRecord",
    "IngestAck",
    "GaitSegment",
    "SegmentFlags",
    "FilterDecision",
    "RejectReason",
    "edge_case_filter",
    "pair_pressure_streams",
    "detect_bouts",
    "segment_walks",
]
