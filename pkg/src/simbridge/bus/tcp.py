"""TCP transport: one session thread pair per connection."""
from __future__ import annotations

import logging
import queue
import socket
import threading

from ..errors import FrameError
from .local import Bus, Subscription
from .message import Message, encode_frame, encode_subscribe, split_frame

log = logging.getLogger(__name__)

DEFAULT_PORT = 7447
_CLOSE = object()


def _pattern(pat: str):
    return (pat[:-1], True) if pat.endswith("*") else (pat, False)


class _FrameReader:
    def __init__(self, sock):
        self.sock = sock
        self.buf = bytearray()

    def frames(self):
        """Yield decoded frames until EOF. Malformed input raises ``FrameError``."""
        while True:
            while True:
                item, end = split_frame(self.buf)
                if item is None:
                    break
                del self.buf[:end]
                yield item
            chunk = self.sock.recv(65536)
            if not chunk:
                if self.buf:
                    raise FrameError(f"connection closed mid-frame ({len(self.buf)} bytes pending)")
                return
            self.buf += chunk


class _Session:
    def __init__(self, server, sock, addr):
        self.server, self.sock, self.addr = server, sock, addr
        self.out = queue.SimpleQueue()
        self.listeners = []
        self.patterns = []
        self.reason = None
        self._closed = False
        self._close_lock = threading.Lock()
        self.reader = threading.Thread(target=self._read, name=f"bus-read-{addr}", daemon=True)
        self.writer = threading.Thread(target=self._write, name=f"bus-write-{addr}", daemon=True)

    def start(self):
        self.reader.start()
        self.writer.start()

    def _read(self):
        bus = self.server.bus
        try:
            for item in _FrameReader(self.sock).frames():
                if isinstance(item, Message):
                    bus.publish(item)
                else:
                    # one listener per session, so overlapping patterns still deliver once
                    self.patterns.append(_pattern(item[1]))
                    if not self.listeners:
                        self.listeners.append(bus.listen("", self._forward, prefix=True))
        except (FrameError, ValueError) as exc:
            self.reason = str(exc)
            log.warning("closing bus session %s: %s", self.addr, exc)
        except OSError as exc:
            self.reason = str(exc)
        finally:
            self.close()

    def _forward(self, msg):
        for pat, prefix in self.patterns:
            if msg.topic.startswith(pat) if prefix else msg.topic == pat:
                self.out.put(msg)
                return

    def _write(self):
        while True:
            msg = self.out.get()
            if msg is _CLOSE:
                return
            try:
                self.sock.sendall(encode_frame(msg))
            except OSError:
                self.close()
                return

    def close(self):
        with self._close_lock:
            if self._closed:
                return
            self._closed = True
        for lst in self.listeners:
            self.server.bus.unlisten(lst)
        self.listeners = []
        self.out.put(_CLOSE)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        self.server._drop(self)


class BusServer:
    def __init__(self, bus: Bus, host="127.0.0.1", port=DEFAULT_PORT):
        self.bus = bus
        self._sock = socket.create_server((host, port))
        self.host, self.port = self._sock.getsockname()[:2]
        self._sessions = set()
        self._lock = threading.Lock()
        self._closed = False
        self._thread = threading.Thread(target=self._accept, name="bus-accept", daemon=True)
        self._thread.start()

    def _accept(self):
        while not self._closed:
            try:
                sock, addr = self._sock.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            s = _Session(self, sock, addr)
            with self._lock:
                self._sessions.add(s)
            s.start()

    def _drop(self, session):
        with self._lock:
            self._sessions.discard(session)

    @property
    def session_count(self):
        with self._lock:
            return len(self._sessions)

    def close(self):
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        with self._lock:
            sessions = list(self._sessions)
        for s in sessions:
            s.close()
        self._thread.join(timeout=2)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(bus: Bus, port=DEFAULT_PORT, host="127.0.0.1") -> BusServer:
    """Listen on ``host:port`` (0 picks a free port, see ``server.port``)."""
    return BusServer(bus, host, port)


class RemoteBus:
    """Client endpoint. Subscriptions end with status ``"disconnected"`` when the server goes away."""

    def __init__(self, host, port, timeout=5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._subs = []
        self._lock = threading.Lock()
        self.status = "connected"
        self._reader = threading.Thread(target=self._read, name="bus-client", daemon=True)
        self._reader.start()

    def _send(self, data):
        with self._send_lock:
            self._sock.sendall(data)

    def publish(self, msg: Message):
        self._send(encode_frame(msg))

    def subscribe(self, topic) -> Subscription:
        pat, prefix = _pattern(topic)
        sub = Subscription(None, pat, prefix)
        with self._lock:
            self._subs.append(sub)
        self._send(encode_subscribe(topic))
        return sub

    def _read(self):
        status = "disconnected"
        try:
            for item in _FrameReader(self._sock).frames():
                if not isinstance(item, Message):
                    continue
                with self._lock:
                    subs = list(self._subs)
                for s in subs:
                    if not s.closed and s.matches(item.topic):
                        s._deliver(item)
        except FrameError as exc:
            status = f"error: {exc}"
        except OSError:
            pass
        if self.status == "connected":
            self.status = status
        with self._lock:
            subs = list(self._subs)
        for s in subs:
            s._end(self.status)

    def close(self):
        self.status = "closed"
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._reader.join(timeout=2)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect(address, port=None) -> RemoteBus:
    """``connect("host:port")`` or ``connect(host, port)``."""
    if port is None:
        host, _, p = str(address).rpartition(":")
        host, port = host or "127.0.0.1", int(p)
    else:
        host = address
    return RemoteBus(host, port)
