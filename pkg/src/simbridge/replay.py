"""Capture bus topics to JSON and play them back on the same topics."""
from __future__ import annotations

import base64
import heapq
import json
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bus.message import KIND_TAGS, Message
from .errors import InputError


@dataclass
class ReplayStream:
    """Entries are ``(t_ns, payload bytes)``; payloads are kept in wire form so equality is exact."""

    topic: str
    kind: str
    entries: list = field(default_factory=list)

    def values(self, i):
        t, data = self.entries[i]
        return data if self.kind == "Raw" else np.frombuffer(data, dtype="<f8")

    def __len__(self):
        return len(self.entries)


class Recording:
    """Subscribe now, collect until :meth:`stop`."""

    def __init__(self, bus, topics):
        self._bus = bus
        self._subs = {}
        for t in dict.fromkeys(topics):
            self._subs[t] = bus.subscribe(t)

    def stop(self):
        streams = []
        for topic, sub in self._subs.items():
            msgs = sub.drain()
            sub.close()
            kind = msgs[0].kind if msgs else (self._bus.kind_of(topic) or "Raw")
            streams.append(ReplayStream(topic, kind, [(m.timestamp_ns, m.data) for m in msgs]))
        return streams


def record(bus, topics, duration):
    rec = Recording(bus, topics)
    time.sleep(duration)
    return rec.stop()


def stream_filename(topic: str) -> str:
    name = topic.lstrip("/").replace("/", ".")
    if not name or "\\" in name or name.startswith("."):
        raise InputError(f"topic {topic!r} does not map to a file name")
    return name + ".json"


def _float_out(v: float):
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return v


_SPECIAL = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}


def _float_in(v, where):
    if isinstance(v, str):
        if v in _SPECIAL:
            return _SPECIAL[v]
        raise InputError(f"{where}: unexpected string {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"{where}: expected a number, got {type(v).__name__}")
    return float(v)


def stream_to_json(s: ReplayStream) -> str:
    entries = []
    for t, data in s.entries:
        if s.kind == "Raw":
            payload = base64.b64encode(data).decode("ascii")
        else:
            payload = [_float_out(v) for v in struct.unpack(f"<{len(data) // 8}d", data)]
        entries.append({"t_ns": int(t), "data": payload})
    # json writes floats with repr, which round-trips every finite double
    return json.dumps({"topic": s.topic, "kind": s.kind, "entries": entries}, allow_nan=False) + "\n"


def stream_from_json(text: str, where="<stream>") -> ReplayStream:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{where}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{where}: top level must be an object")
    for key in ("topic", "kind", "entries"):
        if key not in doc:
            raise InputError(f"{where}: missing field {key!r}")
    topic, kind, raw = doc["topic"], doc["kind"], doc["entries"]
    if not isinstance(topic, str):
        raise InputError(f"{where}: field 'topic' must be a string")
    if kind not in KIND_TAGS:
        raise InputError(f"{where}: field 'kind' has unknown value {kind!r}")
    if not isinstance(raw, list):
        raise InputError(f"{where}: field 'entries' must be a list")
    entries = []
    last = -1
    for i, e in enumerate(raw):
        at = f"{where}: entries[{i}]"
        if not isinstance(e, dict) or "t_ns" not in e or "data" not in e:
            raise InputError(f"{at}: needs 't_ns' and 'data'")
        t = e["t_ns"]
        if isinstance(t, bool) or not isinstance(t, int) or t < 0:
            raise InputError(f"{at}.t_ns: expected a non-negative integer")
        if t < last:
            raise InputError(f"{at}.t_ns: timestamps must be non-decreasing")
        last = t
        d = e["data"]
        if kind == "Raw":
            if not isinstance(d, str):
                raise InputError(f"{at}.data: Raw payload must be a base64 string")
            try:
                data = base64.b64decode(d, validate=True)
            except ValueError:
                raise InputError(f"{at}.data: invalid base64") from None
        else:
            if not isinstance(d, list):
                raise InputError(f"{at}.data: expected a list of numbers")
            vals = [_float_in(v, f"{at}.data[{j}]") for j, v in enumerate(d)]
            data = struct.pack(f"<{len(vals)}d", *vals)
        try:
            Message(topic or "/", t, kind, data)
        except InputError as exc:
            raise InputError(f"{at}.data: {exc}") from None
        entries.append((t, data))
    return ReplayStream(topic, kind, entries)


def save(streams, directory):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = {}
    paths = []
    for s in streams:
        fn = stream_filename(s.topic)
        if fn in names:
            raise InputError(f"topics {names[fn]!r} and {s.topic!r} map to the same file {fn}")
        names[fn] = s.topic
        p = out / fn
        p.write_text(stream_to_json(s), encoding="utf-8")
        paths.append(p)
    return paths


def load(directory):
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{d}: not a directory")
    return [stream_from_json(p.read_text(encoding="utf-8"), str(p)) for p in sorted(d.glob("*.json"))]


@dataclass
class ReplayReport:
    counts: dict
    wall_s: float
    total: int = 0


def replay(bus, streams, speed=1.0, flat_out=False) -> ReplayReport:
    """Republish every entry, merged by ``t_ns`` (ties by topic), paced at ``speed``."""
    if not flat_out and not speed > 0:
        raise InputError("speed must be > 0")
    heap = [(s.entries[0][0], s.topic, si, 0) for si, s in enumerate(streams) if s.entries]
    heapq.heapify(heap)
    counts = {s.topic: 0 for s in streams}
    t0 = heap[0][0] if heap else 0
    start = time.perf_counter()
    while heap:
        t, topic, si, ei = heapq.heappop(heap)
        s = streams[si]
        if not flat_out:
            wait = start + (t - t0) / 1e9 / speed - time.perf_counter()
            if wait > 0:
                time.sleep(wait)
        bus.publish(Message(s.topic, t, s.kind, s.entries[ei][1]))
        counts[topic] += 1
        if ei + 1 < len(s.entries):
            heapq.heappush(heap, (s.entries[ei + 1][0], s.topic, si, ei + 1))
    return ReplayReport(counts, time.perf_counter() - start, sum(counts.values()))
