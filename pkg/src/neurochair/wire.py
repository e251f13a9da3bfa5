"""Wire protocol: newline-delimited JSON messages, plus a minimal WebSocket layer.

Every message is one UTF-8 JSON object per line with keys `type` (string),
`seq` (integer), `t` (seconds, float) and `payload` (object). The same schema
travels over raw TCP and over WebSocket text frames.
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass

PROTOCOL_VERSION = 1

MESSAGE_TYPES = frozenset({
    "frame", "features", "prediction", "command", "telemetry",
    "cue", "training_control", "session_control", "error", "ack",
})


class ProtocolError(ValueError):
    """Malformed wire message."""


@dataclass(frozen=True)
class WireMessage:
    type: str
    seq: int
    t: float
    payload: dict

    def __post_init__(self):
        if self.type not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {self.type!r}")
        if not isinstance(self.seq, int) or isinstance(self.seq, bool) or self.seq < 0:
            raise ProtocolError(f"seq must be a non-negative integer, got {self.seq!r}")
        if not isinstance(self.payload, dict):
            raise ProtocolError(f"payload must be an object, got {type(self.payload).__name__}")


def encode(msg: WireMessage) -> bytes:
    doc = {"type": msg.type, "seq": msg.seq, "t": msg.t, "payload": msg.payload}
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")


def decode_msg(line: bytes | str) -> WireMessage:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProtocolError(f"invalid UTF-8: {e}") from None
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ProtocolError("message must be a JSON object")
    missing = {"type", "seq", "t", "payload"} - doc.keys()
    if missing:
        raise ProtocolError(f"missing keys: {sorted(missing)}")
    if not isinstance(doc["type"], str):
        raise ProtocolError("type must be a string")
    if not isinstance(doc["t"], (int, float)) or isinstance(doc["t"], bool):
        raise ProtocolError("t must be a number")
    return WireMessage(type=doc["type"], seq=doc["seq"], t=float(doc["t"]),
                       payload=doc["payload"])


def hello_payload() -> dict:
    return {"hello": True, "v": PROTOCOL_VERSION}


# --------------------------------------------------------------- websocket

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_handshake_response(headers: dict[str, str]) -> bytes:
    key = headers.get("sec-websocket-key")
    if not key:
        raise ProtocolError("websocket upgrade without Sec-WebSocket-Key")
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n"
        "\r\n"
    ).encode("ascii")


def ws_encode_text(data: bytes) -> bytes:
    """Server-to-client text frame (unmasked)."""
    n = len(data)
    if n < 126:
        header = struct.pack("!BB", 0x81, n)
    elif n < 65536:
        header = struct.pack("!BBH", 0x81, 126, n)
    else:
        header = struct.pack("!BBQ", 0x81, 127, n)
    return header + data


class WsFrameReader:
    """Incremental client-frame parser: yields (opcode, payload) per frame."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes):
        self._buf.extend(data)
        frames = []
        while True:
            frame = self._try_parse()
            if frame is None:
                return frames
            frames.append(frame)

    def _try_parse(self):
        buf = self._buf
        if len(buf) < 2:
            return None
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        pos = 2
        if length == 126:
            if len(buf) < 4:
                return None
            length = struct.unpack_from("!H", buf, 2)[0]
            pos = 4
        elif length == 127:
            if len(buf) < 10:
                return None
            length = struct.unpack_from("!Q", buf, 2)[0]
            pos = 10
        mask = b""
        if masked:
            if len(buf) < pos + 4:
                return None
            mask = bytes(buf[pos:pos + 4])
            pos += 4
        if len(buf) < pos + length:
            return None
        payload = bytes(buf[pos:pos + length])
        del buf[:pos + length]
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return opcode, payload


WS_OP_TEXT = 0x1
WS_OP_CLOSE = 0x8
WS_OP_PING = 0x9
WS_OP_PONG = 0xA


def ws_encode_control(opcode: int, data: bytes = b"") -> bytes:
    return struct.pack("!BB", 0x80 | opcode, len(data)) + data
