"""Virtual appliances: protocol-faithful UDP responders with typed state.

Each device owns its token, state, and a command log; fault injection hooks
(packet drops, offline, out-of-band state changes) support retry and
reconciliation testing.  State transitions are a pure fold over the accepted
command log, which the tests replay as an oracle.
"""

from __future__ import annotations

import threading
import time
import socket
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .protocol import ChecksumError, PacketError, decode_packet, encode_packet, hello_response, parse_header
from .registry import CAPABILITIES, DEFAULT_STATES, PARAM_TO_PROPERTY, PROPERTIES, DeviceDescriptor, validate_param

ERR_UNSUPPORTED = -2
ERR_BAD_PARAMS = -3


@dataclass
class CommandLogEntry:
    ts: float
    request_id: int
    method: str
    params: List[Any]


def apply_command(kind: str, state: Dict[str, Any], method: str, params: List[Any]) -> Dict[str, Any]:
    """Pure fold step: next state after one accepted set-command."""
    schema = CAPABILITIES[kind]
    param_keys, _ = schema[method]
    new_state = dict(state)
    for key, value in zip(param_keys, params):
        new_state[PARAM_TO_PROPERTY[key]] = value
    return new_state


class VirtualDevice:
    def __init__(self, descriptor: DeviceDescriptor, time_fn=time.monotonic):
        self.descriptor = descriptor
        self.kind = descriptor.kind
        self.state: Dict[str, Any] = dict(DEFAULT_STATES[descriptor.kind])
        self.command_log: List[CommandLogEntry] = []
        self.time_fn = time_fn
        self.start_time = time_fn()
        self.lock = threading.Lock()
        # fault injection
        self.drop_next_requests = 0
        self.offline = False
        self.checksum_failures = 0

    @property
    def stamp(self) -> int:
        return int(self.time_fn() - self.start_time)

    def set_property_out_of_band(self, prop: str, value: Any) -> None:
        """Simulates a physical interaction (e.g. wall switch)."""
        with self.lock:
            self.state[prop] = value

    def handle_datagram(self, data: bytes) -> Optional[bytes]:
        if self.offline:
            return None
        if self.drop_next_requests > 0:
            self.drop_next_requests -= 1
            return None
        try:
            packet, body = decode_packet(data, self.descriptor.token)
        except ChecksumError:
            self.checksum_failures += 1
            return None
        except PacketError:
            return None
        if body is None:  # hello
            return hello_response(self.descriptor.device_id, self.stamp)
        with self.lock:
            response = self._dispatch(body)
        return encode_packet(self.descriptor.token, self.descriptor.device_id, self.stamp, response)

    def _dispatch(self, body: Dict[str, Any]) -> Dict[str, Any]:
        req_id = body.get("id", 0)
        method = body.get("method", "")
        params = body.get("params", [])
        if method == "get_prop":
            known = PROPERTIES[self.kind]
            values = [self.state.get(p) if p in known else None for p in params]
            return {"id": req_id, "result": values}
        schema = CAPABILITIES[self.kind]
        if method not in schema:
            return {"id": req_id, "error": {"code": ERR_UNSUPPORTED, "message": f"unsupported method {method!r}"}}
        param_keys, constraints = schema[method]
        if len(params) != len(param_keys):
            return {"id": req_id, "error": {"code": ERR_BAD_PARAMS, "message": "wrong parameter count"}}
        for key, value in zip(param_keys, params):
            if not validate_param(constraints[key], value):
                return {"id": req_id, "error": {"code": ERR_BAD_PARAMS, "message": f"parameter {key!r} out of range"}}
        self.state = apply_command(self.kind, self.state, method, params)
        self.command_log.append(CommandLogEntry(self.time_fn(), req_id, method, list(params)))
        return {"id": req_id, "result": ["ok"]}


def make_virtual_device(descriptor: DeviceDescriptor, **kwargs) -> VirtualDevice:
    return VirtualDevice(descriptor, **kwargs)


class UdpDeviceServer:
    """One UDP socket + responder thread per virtual device."""

    def __init__(self, device: VirtualDevice, host: str = "127.0.0.1", port: Optional[int] = None):
        self.device = device
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, device.descriptor.port if port is None else port))
        self.address = self.sock.getsockname()
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._running = False

    def start(self) -> "UdpDeviceServer":
        self._running = True
        self._thread.start()
        return self

    def _serve(self) -> None:
        self.sock.settimeout(0.2)
        while self._running:
            try:
                data, addr = self.sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            reply = self.device.handle_datagram(data)
            if reply is not None:
                try:
                    self.sock.sendto(reply, addr)
                except OSError:
                    break

    def stop(self) -> None:
        self._running = False
        try:
            self.sock.close()
        except OSError:
            pass
        if self._thread.is_alive():
            self._thread.join(timeout=1.0)
