"""Physics loop in its own thread, publishing immutable snapshots to a latest-value slot."""
from __future__ import annotations

import hashlib
import logging
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, RuntimeStateError, SimbridgeError
from .physics.state import frozen
from .physics.world import World

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContactPoint:
    body_a: str
    body_b: str
    point: np.ndarray
    normal: np.ndarray
    penetration: float
    normal_impulse: float


@dataclass(frozen=True)
class Snapshot:
    sim_time: float
    step: int
    bodies: tuple
    readings: tuple
    contacts: tuple
    checksum: int
    terminal: bool = False

    def body(self, body_id):
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise KeyError(body_id)

    def valid(self) -> bool:
        return payload_checksum(self.sim_time, self.step, self.bodies, self.readings, self.contacts) == self.checksum


def payload_checksum(sim_time, step, bodies, readings, contacts) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<dq", sim_time, step))
    for b in bodies:
        h.update(b.id.encode())
        h.update(b.position.tobytes())
        h.update(b.orientation.tobytes())
        h.update(b.linear_velocity.tobytes())
        h.update(b.angular_velocity.tobytes())
    for r in readings:
        h.update(r.sensor_id.encode())
        h.update(struct.pack("<d", r.timestamp))
        h.update(r.values.tobytes())
    for c in contacts:
        h.update(c.body_a.encode() + b"\0" + c.body_b.encode())
        h.update(c.point.tobytes())
        h.update(c.normal.tobytes())
        h.update(struct.pack("<dd", c.penetration, c.normal_impulse))
    return int.from_bytes(h.digest(), "little")


def make_snapshot(world: World, readings=None, contacts=None, terminal=False) -> Snapshot:
    bodies = tuple(world.body_states())
    readings = tuple(readings if readings is not None else world.eval_sensors())
    cps = tuple(
        ContactPoint(c.body_a, c.body_b, frozen(c.point), frozen(c.normal), float(c.penetration), float(c.normal_impulse))
        for c in (contacts if contacts is not None else world.last_contacts)
    )
    t = world.time
    return Snapshot(t, world.step_count, bodies, readings, cps, payload_checksum(t, world.step_count, bodies, readings, cps), terminal)


@dataclass
class RuntimeConfig:
    physics_hz: float = 1000.0
    realtime: bool = False
    max_steps: Optional[int] = None

    def __post_init__(self):
        if not self.physics_hz > 0:
            raise InputError(f"physics_hz must be > 0, got {self.physics_hz}")
        if self.max_steps is not None and self.max_steps < 0:
            raise InputError("max_steps must be >= 0")


_active_worlds = set()
_active_lock = threading.Lock()


class Runtime:
    """Handle returned by :func:`start`."""

    def __init__(self, world: World, config: RuntimeConfig):
        dt = 1.0 / config.physics_hz
        if abs(world.dt - dt) > 1e-15 * max(1.0, dt):
            raise InputError(f"world dt {world.dt} does not match physics_hz {config.physics_hz}")
        self.world = world
        self.config = config
        self.errors = []
        self._slot_lock = threading.Lock()
        self._forces = []
        self._forces_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = None
        self._final = None
        self._observers = []
        self._pre_step = []
        self._slot = make_snapshot(world)
        self.realtime_overruns = 0

    # hooks run inside the physics thread
    def add_observer(self, fn):
        """``fn(snapshot)`` after every publication, including the initial snapshot."""
        self._observers.append(fn)

    def add_pre_step(self, fn):
        """``fn(world)`` just before every step."""
        self._pre_step.append(fn)

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self) -> "Runtime":
        with _active_lock:
            if self._thread is not None or id(self.world) in _active_worlds:
                raise RuntimeStateError("runtime already started on this world")
            _active_worlds.add(id(self.world))
        # observers may push forces for step 1 from the initial snapshot
        self._thread = threading.Thread(target=self._loop, name="physics", daemon=True)
        for fn in self._observers:
            fn(self._slot)
        self._thread.start()
        return self

    def _publish(self, snap):
        with self._slot_lock:
            self._slot = snap
        for fn in self._observers:
            fn(snap)

    def _drain_forces(self):
        with self._forces_lock:
            pending, self._forces = self._forces, []
        for body, force, torque in pending:
            try:
                self.world.apply_external(body, force, torque)
            except InputError as exc:
                self.errors.append(exc)
                log.warning("dropped force: %s", exc)

    def _loop(self):
        world, cfg = self.world, self.config
        dt = world.dt
        next_deadline = time.perf_counter() + dt
        try:
            while not self._stop.is_set():
                if cfg.max_steps is not None and world.step_count >= cfg.max_steps:
                    break
                self._drain_forces()
                for fn in self._pre_step:
                    fn(world)
                contacts, readings = world.step()
                self._publish(make_snapshot(world, readings, contacts))
                if cfg.realtime:
                    now = time.perf_counter()
                    wait = next_deadline - now
                    if wait > 0:
                        time.sleep(wait)
                    elif wait < -0.05:
                        # far behind: resynchronize instead of bursting
                        self.realtime_overruns += 1
                        next_deadline = now
                    next_deadline += dt
        except SimbridgeError as exc:
            self.errors.append(exc)
            log.error("physics loop stopped: %s", exc)
        except Exception as exc:  # keep the handle usable; surface through errors
            self.errors.append(exc)
            log.exception("physics loop crashed")
        finally:
            with self._slot_lock:
                last = self._slot
                self._final = Snapshot(last.sim_time, last.step, last.bodies, last.readings, last.contacts, last.checksum, True)
                self._slot = self._final
            with _active_lock:
                _active_worlds.discard(id(self.world))

    def latest(self) -> Snapshot:
        if self._thread is None:
            raise RuntimeStateError("runtime not started")
        with self._slot_lock:
            return self._slot

    def push_force(self, body, force=(0.0, 0.0, 0.0), torque=(0.0, 0.0, 0.0)):
        """Queue a force for the next step boundary; bad bodies land in ``errors``."""
        if self._thread is None:
            raise RuntimeStateError("runtime not started")
        with self._forces_lock:
            self._forces.append((body, force, torque))

    def wait(self, timeout=None) -> Snapshot:
        """Block until the loop ends on its own (``max_steps`` or an error)."""
        if self._thread is None:
            raise RuntimeStateError("runtime not started")
        self._thread.join(timeout)
        return self.latest()

    def stop(self) -> Snapshot:
        if self._thread is None:
            raise RuntimeStateError("runtime not started")
        self._stop.set()
        self._thread.join()
        return self._final


def start(world: World, config: RuntimeConfig | None = None) -> Runtime:
    cfg = config or RuntimeConfig(physics_hz=1.0 / world.dt)
    return Runtime(world, cfg).start()


def latest(handle: Runtime) -> Snapshot:
    return handle.latest()


def push_force(handle: Runtime, body, force, torque=(0.0, 0.0, 0.0)):
    handle.push_force(body, force, torque)


def stop(handle: Runtime) -> Snapshot:
    return handle.stop()
