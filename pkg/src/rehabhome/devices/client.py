"""Control-protocol client: handshake, request/response matching, state cache."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from .protocol import ChecksumError, PacketError, decode_packet, encode_packet, hello_packet, parse_header
from .registry import PARAM_TO_PROPERTY, PROPERTIES, DeviceDescriptor, DeviceState
from .transport import TransportTimeout, UdpTransport


class Unreachable(ConnectionError):
    pass


class DeviceError(RuntimeError):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(f"device error {code}: {message}")


class MiioClient:
    """Per-device client; safe for concurrent callers (commands serialize)."""

    def __init__(self, descriptor: DeviceDescriptor, transport=None, timeout_s: float = 3.0):
        self.descriptor = descriptor
        self.transport = transport or UdpTransport(descriptor.address)
        self.timeout_s = timeout_s
        self.state = DeviceState(device_id=descriptor.device_id, properties={})
        self._next_id = 1
        self._stamp_base: Optional[int] = None
        self._stamp_time: float = 0.0
        self._lock = threading.Lock()
        self.retry_count = 0

    # -- handshake ---------------------------------------------------------
    def handshake(self) -> Tuple[int, int]:
        """Send hello; returns (device_id, stamp).  One retry, then Unreachable."""
        with self._lock:
            for attempt in range(2):
                try:
                    self.transport.send(hello_packet())
                    data = self.transport.recv(self.timeout_s)
                    packet = parse_header(data)
                    self._stamp_base = packet.stamp
                    self._stamp_time = time.monotonic()
                    self.state.touch(packet.stamp)
                    self.state.online = True
                    return packet.device_id, packet.stamp
                except (TransportTimeout, PacketError):
                    if attempt == 0:
                        self.retry_count += 1
                        continue
            self.state.online = False
            raise Unreachable(f"device {self.descriptor.device_id} did not answer hello")

    def _current_stamp(self) -> int:
        if self._stamp_base is None:
            raise Unreachable("handshake required before commands")
        return self._stamp_base + int(time.monotonic() - self._stamp_time)

    # -- commands ----------------------------------------------------------
    def send_command(self, method: str, params: Optional[List[Any]] = None) -> List[Any]:
        """JSON-RPC round trip; retransmits once on timeout, matches response id."""
        params = params or []
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            body = {"id": req_id, "method": method, "params": params}
            frame = encode_packet(self.descriptor.token, self.descriptor.device_id, self._current_stamp(), body)
            response = self._exchange(frame, req_id)
        if "error" in response:
            err = response["error"]
            raise DeviceError(int(err.get("code", -1)), str(err.get("message", "")))
        result = response.get("result", [])
        self._update_state_after(method, params, result)
        return result

    def _exchange(self, frame: bytes, req_id: int) -> Dict[str, Any]:
        deadline_attempts = 2  # original + one retransmit
        for attempt in range(deadline_attempts):
            try:
                self.transport.send(frame)
                remaining = self.timeout_s
                t0 = time.monotonic()
                while remaining > 0:
                    data = self.transport.recv(remaining)
                    try:
                        packet, body = decode_packet(data, self.descriptor.token)
                    except (ChecksumError, PacketError):
                        remaining = self.timeout_s - (time.monotonic() - t0)
                        continue
                    if body is None or body.get("id") != req_id:
                        # stale or duplicated response: ignore and keep waiting
                        remaining = self.timeout_s - (time.monotonic() - t0)
                        continue
                    self.state.touch(packet.stamp)
                    self.state.online = True
                    return body
                raise TransportTimeout("response wait exhausted")
            except TransportTimeout:
                if attempt == 0:
                    self.retry_count += 1
                    continue
        self.state.online = False
        raise Unreachable(f"device {self.descriptor.device_id} unreachable after retry")

    def _update_state_after(self, method: str, params: List[Any], result: List[Any]) -> None:
        props = PROPERTIES[self.descriptor.kind]
        if method == "get_prop":
            for name, value in zip(params, result):
                if name in props:
                    self.state.properties[name] = value
            return
        schema = self.descriptor.capabilities
        if method in schema:
            for key, value in zip(schema[method][0], params):
                self.state.properties[PARAM_TO_PROPERTY[key]] = value

    def get_properties(self, names: Optional[List[str]] = None) -> Dict[str, Any]:
        names = names or sorted(PROPERTIES[self.descriptor.kind])
        values = self.send_command("get_prop", list(names))
        return dict(zip(names, values))

    def close(self) -> None:
        self.transport.close()
