"""Periodic device-state polling and reconciliation.

Each cycle issues get_prop to every registered device.  A divergence between
the client's cached (intended) state and the polled state raises a
reconciliation event and adopts the actual value; an unreachable device
yields a single offline transition until it recovers.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from .client import MiioClient, Unreachable
from .registry import PROPERTIES


@dataclass
class ReconciliationEvent:
    ts: float
    device_id: int
    prop: str
    expected: Any
    actual: Any


@dataclass
class OfflineEvent:
    ts: float
    device_id: int
    offline: bool


def poll_once(clients: List[MiioClient], now: Optional[float] = None) -> List[object]:
    """One polling cycle over all clients; returns emitted events."""
    events: List[object] = []
    ts = time.time() if now is None else now
    for client in clients:
        was_online = client.state.online
        props = sorted(PROPERTIES[client.descriptor.kind])
        try:
            expected = dict(client.state.properties)
            actual = client.get_properties(props)
        except Unreachable:
            if was_online:
                events.append(OfflineEvent(ts, client.descriptor.device_id, offline=True))
            continue
        if not was_online:
            events.append(OfflineEvent(ts, client.descriptor.device_id, offline=False))
        for prop in props:
            if prop in expected and expected[prop] != actual.get(prop):
                events.append(ReconciliationEvent(ts, client.descriptor.device_id, prop, expected[prop], actual[prop]))
        client.state.properties.update(actual)
    return events


class StatePoller:
    """Background poller; collects events until stopped."""

    def __init__(self, clients: List[MiioClient], period_s: float = 30.0):
        self.clients = clients
        self.period_s = period_s
        self.events: List[object] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> "StatePoller":
        self._thread.start()
        return self

    def _run(self) -> None:
        while not self._stop.wait(self.period_s):
            self.events.extend(poll_once(self.clients))

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
