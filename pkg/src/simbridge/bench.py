"""Metric registry and a sim-time recorder that writes one CSV per metric."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

EPS = 1e-9

_REGISTRY = {}


class BaseMetric:
    """Subclass with a non-empty ``id`` and ``columns`` to register a metric.

    Lifecycle: ``init(config)`` once, ``observe(snapshot)`` on every snapshot,
    ``sample(snapshot)`` at each sample time (returns the row values),
    ``reset()`` between runs.
    """

    id = ""
    columns = ()

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.id:
            if not cls.columns:
                raise TypeError(f"metric {cls.id} declares no columns")
            _REGISTRY[cls.id] = cls

    def init(self, config: "BenchConfig"):
        self.config = config

    def observe(self, snapshot, tracked, counting: bool):
        pass

    def sample(self, snapshot, tracked) -> tuple:
        raise NotImplementedError

    def reset(self):
        pass


class DistanceToGoal(BaseMetric):
    """Euclidean distance from the tracked body to the goal."""

    id = "DistanceToGoal"
    columns = ("distance",)

    def sample(self, snapshot, tracked):
        return (float(np.linalg.norm(tracked.position - np.asarray(self.config.goal))),)


class Collisions(BaseMetric):
    """Running count of contact pairs that newly form with the tracked body."""

    id = "Collisions"
    columns = ("count",)

    def reset(self):
        self.count = 0
        self.active = frozenset()

    def init(self, config):
        super().init(config)
        self.reset()

    def observe(self, snapshot, tracked, counting):
        body = self.config.tracked_body
        now = set()
        for c in snapshot.contacts:
            if c.body_a == body:
                now.add(c.body_b)
            elif c.body_b == body:
                now.add(c.body_a)
        now = frozenset(now)
        if counting:
            self.count += len(now - self.active)
        self.active = now

    def sample(self, snapshot, tracked):
        return (float(self.count),)


class TimeToGoal(BaseMetric):
    """Sim time of the first sample inside ``goal_radius``; -1 before that."""

    id = "TimeToGoal"
    columns = ("time_to_goal",)

    def reset(self):
        self.reached = -1.0

    def init(self, config):
        super().init(config)
        self.reset()

    def sample(self, snapshot, tracked):
        if self.reached < 0:
            d = float(np.linalg.norm(tracked.position - np.asarray(self.config.goal)))
            if d < self.config.goal_radius:
                self.reached = snapshot.sim_time
        return (self.reached,)


class GlobalPose(BaseMetric):
    id = "GlobalPose"
    columns = ("px", "py", "pz", "qw", "qx", "qy", "qz")

    def sample(self, snapshot, tracked):
        return tuple(float(v) for v in tracked.position) + tuple(float(v) for v in tracked.orientation)


BUILTINS = ("DistanceToGoal", "Collisions", "TimeToGoal", "GlobalPose")


@dataclass(frozen=True)
class MetricInfo:
    id: str
    columns: tuple
    doc: str


class Registry:
    """Known metrics plus the enabled subset (everything, initially)."""

    def __init__(self):
        self.enabled = list(_REGISTRY)

    def list(self):
        return [MetricInfo(k, tuple(c.columns), (c.__doc__ or "").strip()) for k, c in _REGISTRY.items()]

    def enable(self, metric_id):
        if metric_id not in _REGISTRY:
            raise InputError(f"unknown metric {metric_id!r}")
        if metric_id not in self.enabled:
            self.enabled.append(metric_id)

    def disable(self, metric_id):
        if metric_id in self.enabled:
            self.enabled.remove(metric_id)

    def disable_all(self):
        self.enabled = []

    def active(self):
        return [m for m in _REGISTRY if m in self.enabled]


def registry_list():
    return Registry().list()


@dataclass
class BenchConfig:
    tracked_body: str
    goal: tuple = (0.0, 0.0, 0.0)
    goal_radius: float = 1.0
    grace_s: float = 0.0
    timeout_s: float = math.inf
    sample_interval_s: float = 0.1
    metrics: tuple | None = None

    def __post_init__(self):
        self.goal = tuple(float(v) for v in self.goal)
        if len(self.goal) != 3:
            raise InputError("goal must be a 3-vector")
        if not self.grace_s >= 0:
            raise InputError("grace_s must be >= 0")
        if not self.timeout_s > self.grace_s:
            raise InputError("timeout_s must exceed grace_s")
        if not self.sample_interval_s > 0:
            raise InputError("sample_interval_s must be > 0")
        if not self.goal_radius > 0:
            raise InputError("goal_radius must be > 0")
        if not self.tracked_body:
            raise InputError("tracked_body is required")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        known = {"tracked_body", "goal", "goal_radius", "grace_s", "timeout_s", "sample_interval_s", "metrics"}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown bench config keys: {sorted(extra)}")
        d = dict(d)
        if d.get("metrics") is not None:
            d["metrics"] = tuple(d["metrics"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "BenchConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: bench config must be an object")
        return cls.from_dict(data)


@dataclass
class MetricSeries:
    metric: str
    columns: tuple
    rows: list = field(default_factory=list)

    def append(self, t, values):
        if len(values) != len(self.columns):
            raise ValueError(f"{self.metric}: row has {len(values)} values, expected {len(self.columns)}")
        if self.rows and not t > self.rows[-1][0]:
            raise ValueError(f"{self.metric}: row time {t} not after {self.rows[-1][0]}")
        self.rows.append((float(t), tuple(float(v) for v in values)))

    def to_csv(self) -> str:
        lines = [",".join(("time_s",) + tuple(self.columns))]
        for t, vals in self.rows:
            lines.append(",".join(format(v, ".9g") for v in (t,) + vals))
        return "\n".join(lines) + "\n"


class Recorder:
    """Feed it every snapshot via :meth:`observe`; rows land on the sample grid."""

    def __init__(self, config: BenchConfig, registry: Registry | None = None):
        self.config = config
        if config.metrics is not None:
            registry = Registry()
            registry.disable_all()
            for m in config.metrics:
                registry.enable(m)
        self.registry = registry or Registry()
        self.metrics = [_REGISTRY[m]() for m in self.registry.active()]
        for m in self.metrics:
            m.init(config)
        self.series = {m.id: MetricSeries(m.id, tuple(m.columns)) for m in self.metrics}
        self._k = 0
        self.stopped = False
        self.error = None

    def next_sample_time(self):
        return self.config.grace_s + self._k * self.config.sample_interval_s

    def observe(self, snapshot):
        if self.stopped:
            return
        cfg = self.config
        t = snapshot.sim_time
        if t > cfg.timeout_s + EPS:
            self.stopped = True
            return
        try:
            tracked = snapshot.body(cfg.tracked_body)
        except KeyError:
            self.stopped = True
            self.error = InputError(f"tracked body {cfg.tracked_body!r} not in snapshot")
            raise self.error from None
        counting = t >= cfg.grace_s - EPS
        for m in self.metrics:
            m.observe(snapshot, tracked, counting)
        if counting and t >= self.next_sample_time() - EPS:
            for m in self.metrics:
                self.series[m.id].append(t, m.sample(snapshot, tracked))
            # skip grid points a coarse step may have jumped over
            while self.next_sample_time() <= t + EPS:
                self._k += 1

    def reset(self):
        for m in self.metrics:
            m.reset()
        for s in self.series.values():
            s.rows.clear()
        self._k = 0
        self.stopped = False

    def stop(self):
        self.stopped = True

    def export_csv(self, experiment_dir):
        out = Path(experiment_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for mid, s in self.series.items():
            p = out / f"{mid}.csv"
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(s.to_csv())
            paths.append(p)
        return paths


def sample(recorder: Recorder, snapshot):
    recorder.observe(snapshot)


def export_csv(recorder: Recorder, experiment_dir):
    return recorder.export_csv(experiment_dir)
