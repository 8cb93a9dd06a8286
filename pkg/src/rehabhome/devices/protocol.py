"""Encrypted UDP control frame codec (MiIO wire convention).

Frame layout (network byte order):

    0       2       4               8              12             16
    +-------+-------+---------------+--------------+--------------+
    | magic | length| reserved      | device id    | stamp        |
    +-------+-------+---------------+--------------+--------------+
    | md5 checksum (16 bytes; token substituted while hashing)    |
    +--------------------------------------------------------------+
    | AES-128-CBC ciphertext ...                                   |

`length` covers the whole frame (32-byte header + body).  Keys derive from
the 16-byte device token: key = MD5(token), iv = MD5(key || token); the body
is PKCS#7-padded JSON.  The hello frame is a bare header with length 0x0020
and every field after `length` set to 0xFF.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

MAGIC = 0x2131
HEADER_LEN = 32
MAX_PACKET_LEN = 0xFFFF
TOKEN_LEN = 16


class PacketError(ValueError):
    """Malformed frame (bad magic, truncated, bad length, oversized body)."""


class ChecksumError(PacketError):
    """Checksum verification failed (corruption or wrong token)."""


def _md5(data: bytes) -> bytes:
    return hashlib.md5(data).digest()


def derive_keys(token: bytes) -> Tuple[bytes, bytes]:
    """(key, iv) = (MD5(token), MD5(key || token))."""
    if len(token) != TOKEN_LEN:
        raise ValueError(f"token must be {TOKEN_LEN} bytes, got {len(token)}")
    key = _md5(token)
    iv = _md5(key + token)
    return key, iv


def encrypt_body(plaintext: bytes, token: bytes) -> bytes:
    key, iv = derive_keys(token)
    padder = padding.PKCS7(128).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


def decrypt_body(ciphertext: bytes, token: bytes) -> bytes:
    key, iv = derive_keys(token)
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    return unpadder.update(padded) + unpadder.finalize()


def hello_packet() -> bytes:
    return struct.pack(">HH", MAGIC, HEADER_LEN) + b"\xff" * 28


def hello_response(device_id: int, stamp: int) -> bytes:
    return struct.pack(">HHIII", MAGIC, HEADER_LEN, 0, device_id, stamp) + b"\xff" * 16


@dataclass
class ParsedPacket:
    device_id: int
    stamp: int
    length: int
    checksum: bytes
    body: bytes  # raw ciphertext ('' for hello frames)

    @property
    def is_hello(self) -> bool:
        return self.length == HEADER_LEN


def parse_header(data: bytes) -> ParsedPacket:
    if len(data) < HEADER_LEN:
        raise PacketError(f"frame shorter than header: {len(data)} bytes")
    magic, length = struct.unpack(">HH", data[:4])
    if magic != MAGIC:
        raise PacketError(f"bad magic 0x{magic:04x}")
    if length != len(data):
        raise PacketError(f"length field {length} != frame size {len(data)}")
    device_id, stamp = struct.unpack(">II", data[8:16])
    return ParsedPacket(device_id=device_id, stamp=stamp, length=length, checksum=data[16:32], body=data[32:])


def encode_packet(token: bytes, device_id: int, stamp: int, body: Dict[str, Any]) -> bytes:
    """Encrypt and frame a JSON-RPC body `{"id": n, "method": m, "params": [...]}`."""
    plaintext = json.dumps(body, separators=(",", ":"), sort_keys=True).encode("utf-8")
    ciphertext = encrypt_body(plaintext, token)
    total = HEADER_LEN + len(ciphertext)
    if total > MAX_PACKET_LEN:
        raise PacketError(f"body too large: {len(ciphertext)} encrypted bytes")
    head = struct.pack(">HHIII", MAGIC, total, 0, device_id & 0xFFFFFFFF, stamp & 0xFFFFFFFF)
    checksum = _md5(head + token + ciphertext)
    return head + checksum + ciphertext


def decode_packet(data: bytes, token: bytes) -> Tuple[ParsedPacket, Optional[Dict[str, Any]]]:
    """Parse + verify + decrypt a frame; hello frames return body None."""
    packet = parse_header(data)
    if packet.is_hello:
        return packet, None
    expected = _md5(data[:16] + token + packet.body)
    if expected != packet.checksum:
        raise ChecksumError("checksum mismatch")
    plaintext = decrypt_body(packet.body, token)
    try:
        body = json.loads(plaintext.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PacketError(f"body is not valid JSON: {exc}")
    return packet, body
