"""Canonical JSON-lines persistence and the binary tensor container.

All artifacts are either JSONL (sorted keys, one record per line) or the
"RHTC" tensor container (JSON header + raw little-endian arrays), both of
which are byte-deterministic for identical content.
"""

from __future__ import annotations

import json
import struct
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np

from .records import (
    ActivityState,
    AmbientSample,
    Foot,
    GazeSample,
    Modality,
    PerceptionEvent,
    PhysioSample,
    PressureFrame,
    VoiceUtterance,
)


def dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_jsonl(path, records: Iterable[Dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps(record) + "\n")


def read_jsonl(path) -> List[Dict[str, Any]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def payload_from_dict(modality: str, ts_ms: float, data: Dict[str, Any]):
    """Inverse of records.payload_to_dict for timeline replay."""
    if modality == "pressure":
        return PressureFrame(ts_ms, Foot(data["foot"]), np.asarray(data["values"], dtype=float))
    if modality == "physio":
        return PhysioSample(ts_ms, data["heart_rate"], data["hrv"], data["skin_temp"])
    if modality == "ambient":
        return AmbientSample(ts_ms, data["light_level"], data["time_of_day"])
    if modality == "gaze":
        return GazeSample(ts_ms, data["x"], data["y"], data["valid"])
    if modality == "voice":
        return VoiceUtterance(ts_ms, data["text"])
    if modality == "perception":
        return PerceptionEvent(ts_ms, ActivityState(data["state"]), data.get("detail", {}))
    raise ValueError(f"unknown modality {modality!r}")


def read_timeline(path):
    """Load a timeline JSONL back into TimelineRecord objects."""
    from .gateway.fusion import TimelineRecord

    records = []
    for i, raw in enumerate(read_jsonl(path)):
        records.append(
            TimelineRecord(
                ts_ms=int(raw["ts_ms"]),
                source_id=raw["source"],
                modality=Modality(raw["modality"]),
                payload=payload_from_dict(raw["modality"], float(raw["ts_ms"]), raw["payload"]),
                arrival_seq=i,
            )
        )
    return records


# -- tensor container ---------------------------------------------------------

MAGIC = b"RHTC"
VERSION = 1


def write_container(path, tensors: Dict[str, np.ndarray], meta: Dict[str, Any]) -> None:
    index = []
    blobs: List[bytes] = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        dtype = arr.dtype.newbyteorder("<")
        blob = arr.astype(dtype, copy=False).tobytes()
        index.append({"name": name, "dtype": dtype.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": meta, "tensors": index}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path} is not a tensor container")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    payload = data[12 + header_len :]
    tensors = {}
    for entry in header["tensors"]:
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        tensors[entry["name"]] = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
    return tensors, header["meta"]
