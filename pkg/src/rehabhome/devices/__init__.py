from .protocol import (
    ChecksumError,
    PacketError,
    ParsedPacket,
    decode_packet,
    derive_keys,
    encode_packet,
    hello_packet,
    hello_response,
    parse_header,
)
from .registry import DeviceDescriptor, DeviceState, Registry, capability_schema
from .transport import InProcTransport, UdpTransport
from .virtual import VirtualDevice, UdpDeviceServer, make_virtual_device
from .client import DeviceError, MiioClient, Unreachable
from .guard import CommandRecord, GuardDecision, GuardPolicy, guard
from .monitor import OfflineEvent, ReconciliationEvent, poll_once, StatePoller

__all__ = [
    "ChecksumError",
    "PacketError",
    "ParsedPacket",
    "decode_packet",
    "derive_keys",
    "encode_packet",
    "hello_packet",
    "hello_response",
    "parse_header",
    "DeviceDescriptor",
    "DeviceState",
    "Registry",
    "capability_schema",
    "InProcTransport",
    "UdpTransport",
    "VirtualDevice",
    "UdpDeviceServer",
    "make_virtual_device",
    "DeviceError",
    "MiioClient",
    "Unreachable",
    "CommandRecord",
    "GuardDecision",
    "GuardPolicy",
    "guard",
    "OfflineEvent",
    "ReconciliationEvent",
    "poll_once",
    "StatePoller",
]
