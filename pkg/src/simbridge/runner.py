"""Glue for ``simbridge run``: runtime, bus, bench recorder and stream capture in one call."""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .bench import BenchConfig, Recorder
from .bus import Bus, bind_spec, serve
from .errors import InputError, SimulationDiverged
from .physics import World
from .replay import Recording, save
from .runtime import Runtime, RuntimeConfig
from .spec import derive_topics, parse_xml


@dataclass
class RunOptions:
    duration: float = 1.0
    hz: float = 1000.0
    realtime: bool = False
    bus_port: int | None = None
    bench: BenchConfig | None = None
    record_dir: str | None = None
    out_dir: str = "run_out"
    consumers: int = 0
    consumer_hz: float = 60.0


@dataclass
class RunResult:
    steps: int
    sim_time: float
    wall_s: float
    bench_files: list = field(default_factory=list)
    replay_files: list = field(default_factory=list)
    checksum_failures: int = 0
    messages: int = 0
    ignored_commands: int = 0
    bus_port: int | None = None


class PollingConsumer(threading.Thread):
    """Reads the latest snapshot at a fixed wall rate and drains a bus subscription."""

    def __init__(self, runtime, hz, bus=None, prefix="/sensors/"):
        super().__init__(daemon=True)
        self.runtime, self.period = runtime, 1.0 / hz
        self.sub = bus.subscribe_prefix(prefix) if bus is not None else None
        self.halt = threading.Event()
        self.failures = 0
        self.polls = 0
        self.received = 0
        self.monotone = True
        self._last = -1

    def run(self):
        while not self.halt.is_set():
            snap = self.runtime.latest()
            self.polls += 1
            if not snap.valid():
                self.failures += 1
            if snap.step < self._last:
                self.monotone = False
            self._last = snap.step
            if self.sub is not None:
                self.received += len(self.sub.drain())
            if snap.terminal:
                return
            self.halt.wait(self.period)

    def finish(self):
        self.halt.set()
        self.join()
        if self.sub is not None:
            self.received += len(self.sub.drain())
            self.sub.close()


def load_spec(path):
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{p}: not valid UTF-8 ({exc})") from None
    return parse_xml(text, base_dir=p.parent)


def run_spec(spec, opts: RunOptions) -> RunResult:
    if not opts.duration >= 0:
        raise InputError("duration must be >= 0")
    cfg = RuntimeConfig(physics_hz=opts.hz, realtime=opts.realtime, max_steps=int(round(opts.duration * opts.hz)))
    world = World(spec, dt=1.0 / opts.hz)
    rt = Runtime(world, cfg)
    bus = Bus()
    wiring = bind_spec(bus, spec, rt)
    recorder = None
    if opts.bench is not None:
        if opts.bench.tracked_body not in [b.id for b in spec.bodies]:
            raise InputError(f"bench tracked_body {opts.bench.tracked_body!r} is not a body in the scene")
        recorder = Recorder(opts.bench)
        rt.add_observer(recorder.observe)
    recording = None
    if opts.record_dir is not None:
        recording = Recording(bus, [t.name for t in derive_topics(spec) if t.direction == "out"])
    server = serve(bus, opts.bus_port) if opts.bus_port is not None else None
    consumers = []
    t0 = time.perf_counter()
    try:
        rt.start()
        hz_cycle = (opts.consumer_hz, 333.0)
        for i in range(opts.consumers):
            c = PollingConsumer(rt, hz_cycle[i % 2], bus)
            c.start()
            consumers.append(c)
        rt.wait()
        final = rt.stop()
    finally:
        for c in consumers:
            c.finish()
        if server is not None:
            server.close()
        wiring.close()
    wall = time.perf_counter() - t0
    for err in rt.errors:
        if isinstance(err, (SimulationDiverged, InputError)):
            raise err
    result = RunResult(final.step, final.sim_time, wall, bus_port=server.port if server else None)
    result.checksum_failures = sum(c.failures for c in consumers)
    result.messages = wiring.published
    result.ignored_commands = wiring.ignored
    out = Path(opts.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if recorder is not None:
        result.bench_files = [str(p) for p in recorder.export_csv(out)]
    if recording is not None:
        result.replay_files = [str(p) for p in save(recording.stop(), opts.record_dir)]
    summary = {
        "steps": final.step,
        "sim_time": final.sim_time,
        "bodies": {b.id: {"pos": b.position.tolist(), "quat": b.orientation.tolist()} for b in final.bodies},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


def run_scene(path, opts: RunOptions) -> RunResult:
    return run_spec(load_spec(path), opts)
