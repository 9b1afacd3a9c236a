"""Wire protocol: length-delimited UTF-8 JSON frames.

Each frame is a 4-byte big-endian length prefix followed by one JSON document
{id, type, payload} (responses add "ok"). Numeric arrays travel as base64 of
their little-endian float64 bytes so values survive the wire exactly.
"""
from __future__ import annotations

import base64
import json
import socket
import struct
from typing import Any, Optional

import numpy as np

HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 256 * 1024 * 1024

HELLO = "HELLO"
SCORE = "SCORE"
VALUE = "VALUE"
UPDATE_GRAD = "UPDATE_GRAD"
APPLY = "APPLY"
PARAM_DIGEST = "PARAM_DIGEST"
SHUTDOWN = "SHUTDOWN"

REQUEST_TYPES = (HELLO, SCORE, VALUE, UPDATE_GRAD, APPLY, PARAM_DIGEST, SHUTDOWN)


class ProtocolError(RuntimeError):
    pass


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    return {
        "dtype": "float64",
        "shape": list(arr.shape),
        "b64": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def decode_array(spec: dict) -> np.ndarray:
    if spec.get("dtype") != "float64":
        raise ProtocolError(f"unsupported array dtype {spec.get('dtype')!r}")
    raw = base64.b64decode(spec["b64"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(spec["shape"])


def request(msg_id: str, msg_type: str, payload: Optional[dict] = None) -> dict:
    return {"id": msg_id, "type": msg_type, "payload": payload or {}}


def response(msg_id, msg_type: str, payload: Optional[dict] = None) -> dict:
    return {"id": msg_id, "type": msg_type, "ok": True, "payload": payload or {}}


def error_response(msg_id, msg_type: str, message: str) -> dict:
    return {"id": msg_id, "type": msg_type, "ok": False, "payload": {"message": message}}


def frame(obj: dict) -> bytes:
    body = canonical_json(obj)
    return HEADER.pack(len(body)) + body


def send_message(sock: socket.socket, obj: dict) -> None:
    sock.sendall(frame(obj))


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    chunks = []
    got = 0
    while got < n:
        part = sock.recv(n - got)
        if not part:
            return None
        chunks.append(part)
        got += len(part)
    return b"".join(chunks)


def recv_message(sock: socket.socket) -> Optional[dict]:
    """One framed document, or None on a cleanly closed connection."""
    header = _recv_exact(sock, HEADER.size)
    if header is None:
        return None
    (length,) = HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = _recv_exact(sock, length)
    if body is None:
        raise ProtocolError("connection closed mid-frame")
    try:
        return json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable frame: {exc}") from exc
