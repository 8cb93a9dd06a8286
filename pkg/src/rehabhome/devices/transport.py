"""Datagram transports: loopback UDP for integration, in-process for unit tests."""

from __future__ import annotations

import queue
import socket
from typing import Callable, Optional, Tuple


class TransportTimeout(TimeoutError):
    pass


class UdpTransport:
    """One client socket per device address."""

    def __init__(self, address: Tuple[str, int]):
        self.address = address
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(("127.0.0.1", 0))

    def send(self, data: bytes) -> None:
        self.sock.sendto(data, self.address)

    def recv(self, timeout: float) -> bytes:
        self.sock.settimeout(timeout)
        try:
            data, _ = self.sock.recvfrom(65535)
            return data
        except socket.timeout:
            raise TransportTimeout(f"no reply from {self.address} within {timeout}s")

    def close(self) -> None:
        self.sock.close()


class InProcTransport:
    """Calls a datagram handler directly; responses queue like a socket."""

    def __init__(self, handler: Callable[[bytes], Optional[bytes]]):
        self.handler = handler
        self._responses: "queue.Queue[bytes]" = queue.Queue()

    def send(self, data: bytes) -> None:
        reply = self.handler(data)
        if reply is not None:
            self._responses.put(reply)

    def inject(self, data: bytes) -> None:
        """Test hook: enqueue an unsolicited/duplicate datagram."""
        self._responses.put(data)

    def recv(self, timeout: float) -> bytes:
        try:
            return self._responses.get(timeout=min(timeout, 0.05))
        except queue.Empty:
            raise TransportTimeout("no in-process reply")

    def close(self) -> None:
        pass
