"""In-process topic bus."""
from __future__ import annotations

import queue
import re
import threading

from ..errors import InputError, KindMismatchError
from .message import KIND_TAGS, Message

_TOPIC = re.compile(r"^/[^\s\x00]*$")
_END = object()


def check_topic(topic: str):
    if not isinstance(topic, str) or not _TOPIC.match(topic) or len(topic.encode("utf-8")) > 0xFFFF:
        raise InputError(f"malformed topic {topic!r}")


class Subscription:
    """Queue-backed message stream. Iteration ends when the subscription is closed."""

    def __init__(self, bus, pattern, prefix):
        self._bus = bus
        self.pattern = pattern
        self.prefix = prefix
        self._q = queue.SimpleQueue()
        self.closed = False
        self.status = "open"

    def matches(self, topic):
        return topic.startswith(self.pattern) if self.prefix else topic == self.pattern

    def _deliver(self, msg):
        self._q.put(msg)

    def get(self, timeout=None):
        """Next message, or ``None`` once the stream has ended; raises ``queue.Empty`` on timeout."""
        item = self._q.get(timeout=timeout)
        if item is _END:
            self._q.put(_END)
            return None
        return item

    def drain(self):
        out = []
        while True:
            try:
                item = self._q.get_nowait()
            except queue.Empty:
                return out
            if item is _END:
                self._q.put(_END)
                return out
            out.append(item)

    def __iter__(self):
        while True:
            m = self.get()
            if m is None:
                return
            yield m

    def _end(self, status):
        if not self.closed:
            self.closed = True
            self.status = status
            self._q.put(_END)

    def close(self):
        if self._bus is not None:
            self._bus._remove(self)
        self._end("closed")


class _Listener:
    def __init__(self, pattern, prefix, fn):
        self.pattern, self.prefix, self.fn = pattern, prefix, fn
        self.closed = False

    def matches(self, topic):
        return topic.startswith(self.pattern) if self.prefix else topic == self.pattern

    def _deliver(self, msg):
        self.fn(msg)

    def close(self):
        self.closed = True


class Bus:
    """Fan-out delivery under one lock, so every subscriber sees a topic in the same order."""

    def __init__(self):
        self._lock = threading.RLock()
        self._kinds = {}
        self._subs = []
        self.published = 0

    def declare(self, topic, kind):
        check_topic(topic)
        if kind not in KIND_TAGS:
            raise InputError(f"unknown payload kind {kind!r}")
        with self._lock:
            bound = self._kinds.setdefault(topic, kind)
            if bound != kind:
                raise KindMismatchError(f"topic {topic!r} is bound to {bound}, not {kind}")

    def kind_of(self, topic):
        return self._kinds.get(topic)

    def subscriber_count(self):
        with self._lock:
            return len(self._subs)

    def topics(self):
        with self._lock:
            return dict(self._kinds)

    def publish(self, msg: Message):
        check_topic(msg.topic)
        with self._lock:
            bound = self._kinds.setdefault(msg.topic, msg.kind)
            if bound != msg.kind:
                raise KindMismatchError(f"topic {msg.topic!r} is bound to {bound}, got {msg.kind}")
            self.published += 1
            for s in self._subs:
                if s.matches(msg.topic):
                    s._deliver(msg)

    def subscribe(self, topic) -> Subscription:
        check_topic(topic)
        return self._add(Subscription(self, topic, False))

    def subscribe_prefix(self, prefix) -> Subscription:
        return self._add(Subscription(self, prefix, True))

    def listen(self, pattern, fn, prefix=False) -> _Listener:
        """Call ``fn(msg)`` synchronously in the publisher's thread."""
        return self._add(_Listener(pattern, prefix, fn))

    def unlisten(self, listener):
        self._remove(listener)
        listener.close()

    def _add(self, sub):
        with self._lock:
            self._subs.append(sub)
        return sub

    def _remove(self, sub):
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)


def publish(bus, message):
    bus.publish(message)


def subscribe(bus, topic):
    return bus.subscribe(topic)
