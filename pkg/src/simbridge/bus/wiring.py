"""Connect a running world to a bus: sensors out, actuator commands in."""
from __future__ import annotations

import logging
import threading

from ..errors import InputError
from ..spec.compiler import derive_topics, sanitize_topic
from .local import Bus
from .message import Message

log = logging.getLogger(__name__)

ACTUATOR_PREFIX = "/actuators/"


def _t_ns(sim_time):
    return int(round(sim_time * 1e9))


def _dynamic(spec, body):
    while body.parent is not None:
        body = spec.body(body.parent)
    return body.free


class Wiring:
    """Publishes sensor readings from every snapshot and latches inbound commands.

    Inbound ``JointCmd`` on an actuator topic sets that actuator's control. Inbound
    ``Wrench`` (a 3-vector force) on ``/actuators/<body>`` is applied to the body at
    every step until another wrench replaces it.
    """

    def __init__(self, bus: Bus, spec, runtime):
        self.bus = bus
        self.spec = spec
        self.runtime = runtime
        self.topics = derive_topics(spec)
        self.ignored = 0
        self.published = 0
        self._lock = threading.Lock()
        self._controls = {}
        self._wrenches = {}
        sensors = {s.id: s for s in spec.sensors}
        self._out = {}
        for t in self.topics:
            if t.direction == "out":
                bus.declare(t.name, t.kind)
                rate = sensors[t.source].rate
                self._out[t.source] = [t.name, t.kind, (1.0 / rate) if rate else None, 0.0]
        self._actuators = {t.name: t.source for t in self.topics if t.direction == "in"}
        self._bodies = {}
        for b in spec.bodies:
            if _dynamic(spec, b):
                self._bodies.setdefault(sanitize_topic(ACTUATOR_PREFIX + b.id), b.id)
        self._listener = bus.listen(ACTUATOR_PREFIX, self._inbound, prefix=True)
        runtime.add_observer(self._on_snapshot)
        runtime.add_pre_step(self._apply)

    # physics thread
    def _on_snapshot(self, snap):
        for r in snap.readings:
            slot = self._out.get(r.sensor_id)
            if slot is None:
                continue
            name, kind, period, due = slot
            if period is not None:
                if r.timestamp < due - 1e-9:
                    continue
                slot[3] = due + period
            self.bus.publish(Message.make(name, _t_ns(r.timestamp), kind, r.values))
            self.published += 1

    def _apply(self, world):
        with self._lock:
            controls = list(self._controls.items())
            self._controls.clear()
            wrenches = list(self._wrenches.items())
        for act, value in controls:
            world.set_control(act, value)
        for body, force in wrenches:
            world.apply_external(body, force)

    # any publisher thread
    def _inbound(self, msg: Message):
        if msg.kind == "JointCmd" and msg.topic in self._actuators and len(msg.data) >= 8:
            with self._lock:
                self._controls[self._actuators[msg.topic]] = float(msg.values[0])
            return
        if msg.kind == "Wrench" and msg.topic in self._bodies:
            values = msg.values
            with self._lock:
                if not values.any():
                    self._wrenches.pop(self._bodies[msg.topic], None)
                else:
                    self._wrenches[self._bodies[msg.topic]] = values.copy()
            return
        self.ignored += 1
        log.debug("ignored inbound %s on %s", msg.kind, msg.topic)

    def close(self):
        self.bus.unlisten(self._listener)


def bind_spec(bus: Bus, spec, runtime) -> Wiring:
    if bus is None:
        raise InputError("bind_spec needs a bus")
    return Wiring(bus, spec, runtime)
