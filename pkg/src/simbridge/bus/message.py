"""Bus messages and the length-prefixed wire frame."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FrameError, OversizeFrameError, TruncatedFrameError, UnknownTagError

MAX_FRAME = 16 * 1024 * 1024
SUBSCRIBE_TAG = 0
KIND_TAGS = {"Pose": 1, "Imu": 2, "Wrench": 3, "JointCmd": 4, "Raw": 5}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}
FIXED_ARITY = {"Pose": 7, "Imu": 6, "Wrench": 3}

_LEN = struct.Struct("<I")
_TLEN = struct.Struct("<H")
_TS = struct.Struct("<QB")


@dataclass(frozen=True)
class Message:
    """``data`` holds the payload exactly as it goes on the wire: raw bytes or little-endian f64."""

    topic: str
    timestamp_ns: int
    kind: str
    data: bytes

    def __post_init__(self):
        if self.kind not in KIND_TAGS:
            raise FrameError(f"unknown payload kind {self.kind!r}")
        if not 0 <= self.timestamp_ns < 2**64:
            raise FrameError(f"timestamp_ns out of range: {self.timestamp_ns}")
        _check_payload(self.kind, len(self.data))

    @classmethod
    def make(cls, topic, timestamp_ns, kind, values) -> "Message":
        if kind == "Raw":
            return cls(topic, int(timestamp_ns), kind, bytes(values))
        arr = np.ascontiguousarray(values, dtype="<f8").reshape(-1)
        return cls(topic, int(timestamp_ns), kind, arr.tobytes())

    @property
    def values(self) -> np.ndarray:
        if self.kind == "Raw":
            raise FrameError("Raw payload has no float values")
        return np.frombuffer(self.data, dtype="<f8")


def _check_payload(kind, nbytes):
    if kind == "Raw":
        return
    if nbytes % 8:
        raise FrameError(f"{kind} payload size {nbytes} is not a multiple of 8")
    want = FIXED_ARITY.get(kind)
    if want is not None and nbytes != 8 * want:
        raise FrameError(f"{kind} payload needs {want} f64 values, got {nbytes // 8}")


def _frame(topic: str, timestamp_ns: int, tag: int, payload: bytes) -> bytes:
    t = topic.encode("utf-8")
    if len(t) > 0xFFFF:
        raise FrameError(f"topic too long ({len(t)} bytes)")
    body_len = 2 + len(t) + 9 + len(payload)
    if body_len > MAX_FRAME:
        raise OversizeFrameError(f"frame of {body_len} bytes exceeds {MAX_FRAME}")
    return b"".join((_LEN.pack(body_len), _TLEN.pack(len(t)), t, _TS.pack(timestamp_ns, tag), payload))


def encode_frame(msg: Message) -> bytes:
    return _frame(msg.topic, msg.timestamp_ns, KIND_TAGS[msg.kind], msg.data)


def encode_subscribe(pattern: str) -> bytes:
    """Control frame asking a server to forward ``pattern`` (trailing ``*`` = prefix)."""
    return _frame("", 0, SUBSCRIBE_TAG, pattern.encode("utf-8"))


def _parse_body(body: memoryview):
    if len(body) < 2:
        raise TruncatedFrameError("frame too short for topic length")
    (tlen,) = _TLEN.unpack_from(body, 0)
    if len(body) < 2 + tlen + 9:
        raise TruncatedFrameError(f"frame of {len(body)} bytes cannot hold topic of {tlen} bytes plus header")
    try:
        topic = bytes(body[2 : 2 + tlen]).decode("utf-8")
    except UnicodeDecodeError:
        raise FrameError("topic is not valid UTF-8") from None
    ts, tag = _TS.unpack_from(body, 2 + tlen)
    payload = bytes(body[2 + tlen + 9 :])
    if tag == SUBSCRIBE_TAG:
        try:
            return ("subscribe", payload.decode("utf-8"))
        except UnicodeDecodeError:
            raise FrameError("subscribe pattern is not valid UTF-8") from None
    kind = TAG_KINDS.get(tag)
    if kind is None:
        raise UnknownTagError(f"unknown kind tag {tag}")
    return Message(topic, ts, kind, payload)


def split_frame(buf, offset=0):
    """Return ``(item, next_offset)`` for the frame at ``offset``, or ``(None, offset)`` if incomplete.

    ``item`` is a :class:`Message` or ``("subscribe", pattern)``.
    """
    view = memoryview(buf)
    if len(view) - offset < 4:
        return None, offset
    (n,) = _LEN.unpack_from(view, offset)
    if n > MAX_FRAME:
        raise OversizeFrameError(f"frame_len {n} exceeds {MAX_FRAME}")
    end = offset + 4 + n
    if len(view) < end:
        return None, offset
    return _parse_body(view[offset + 4 : end]), end


def decode_any(data: bytes):
    """Decode exactly one frame, data or control."""
    item, end = split_frame(data)
    if item is None:
        raise TruncatedFrameError(f"incomplete frame ({len(data)} bytes)")
    if end != len(data):
        raise FrameError(f"{len(data) - end} trailing bytes after frame")
    return item


def decode_frame(data: bytes) -> Message:
    item = decode_any(data)
    if not isinstance(item, Message):
        raise FrameError("control frame where a data frame was expected")
    return item
