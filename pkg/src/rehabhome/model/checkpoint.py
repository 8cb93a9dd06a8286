"""Versioned binary checkpoint container.

Layout: magic "RHCK", u32 version, u32 header length, UTF-8 JSON header
(config echo + tensor index), then raw little-endian float64 tensor data in
index order.  Writing is fully deterministic for identical model state.
"""

from __future__ import annotations

import json
import struct
from typing import Dict, Tuple

import numpy as np

from .network import ImpairmentNet, ModelConfig

MAGIC = b"RHCK"
VERSION = 1


def checkpoint_bytes(net: ImpairmentNet) -> bytes:
    tensors = net.state_tensors()
    index = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        blob = arr.tobytes()
        index.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"config": net.config.to_dict(), "tensors": index}, sort_keys=True).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<II", VERSION, len(header)), header, *blobs])


def save_checkpoint(net: ImpairmentNet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(net))


def load_checkpoint(path) -> ImpairmentNet:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError("not a checkpoint file")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    payload = data[12 + header_len :]
    config = ModelConfig.from_dict(header["config"])
    net = ImpairmentNet(config)
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        tensors[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
    net.load_state(tensors)
    net.set_train(False)
    return net
