"""Scene description types and JSON ingestion."""
from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .errors import DuplicateIdError, SceneError

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


class Mobility(str, enum.Enum):
    STATIC = "Static"
    DYNAMIC = "Dynamic"


class Complexity(str, enum.Enum):
    SIMPLE = "Simple"
    COMPLEX = "Complex"


@dataclass(frozen=True)
class Transform:
    position: tuple = (0.0, 0.0, 0.0)
    orientation: tuple = (1.0, 0.0, 0.0, 0.0)
    scale: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.position) != 3 or len(self.orientation) != 4 or len(self.scale) != 3:
            raise SceneError("transform needs pos[3], quat[4], scale[3]")
        n = math.sqrt(sum(c * c for c in self.orientation))
        if abs(n - 1.0) > 1e-9:
            raise SceneError(f"quaternion {self.orientation} is not unit (norm {n!r})")
        if any(not s > 0 for s in self.scale):
            raise SceneError(f"scale components must be > 0, got {self.scale}")

    @property
    def uniform_scale(self) -> bool:
        return self.scale[0] == self.scale[1] == self.scale[2]


@dataclass(frozen=True)
class Sphere:
    radius: float


@dataclass(frozen=True)
class Box:
    half_extents: tuple


MeshRef = Union[str, Sphere, Box]


@dataclass(frozen=True)
class PhysicsComponent:
    complexity: Complexity = Complexity.SIMPLE
    mobility_override: Optional[Mobility] = None
    mass: float = 1.0
    friction: float = 0.5
    restitution: float = 0.0

    def __post_init__(self):
        if not self.friction >= 0:
            raise SceneError(f"friction must be >= 0, got {self.friction}")
        if not 0.0 <= self.restitution <= 1.0:
            raise SceneError(f"restitution must be in [0, 1], got {self.restitution}")


@dataclass(frozen=True)
class SceneActor:
    id: str
    mesh: MeshRef
    transform: Transform = field(default_factory=Transform)
    physics: PhysicsComponent = field(default_factory=PhysicsComponent)
    native_mobility: Mobility = Mobility.STATIC
    include_in_heightfield: bool = False


@dataclass(frozen=True)
class LandscapeRegion:
    id: str
    mesh: str
    bbox_min: tuple
    bbox_max: tuple
    resolution: tuple = (64, 64)

    def __post_init__(self):
        if not (self.bbox_max[0] > self.bbox_min[0] and self.bbox_max[1] > self.bbox_min[1]):
            raise SceneError(f"landscape {self.id!r}: bbox needs positive x and y extent")
        if self.bbox_max[2] < self.bbox_min[2]:
            raise SceneError(f"landscape {self.id!r}: bbox z max below z min")
        if len(self.resolution) != 2 or min(self.resolution) < 2:
            raise SceneError(f"landscape {self.id!r}: resolution must be >= 2x2")


@dataclass(frozen=True)
class RobotPawn:
    id: str
    spec_path: str
    spawn: Transform = field(default_factory=Transform)


@dataclass(frozen=True)
class SceneDescription:
    actors: tuple = ()
    landscapes: tuple = ()
    robots: tuple = ()
    gravity: tuple = DEFAULT_GRAVITY
    base_dir: str = field(default=".", compare=False)

    def resolve_path(self, ref: str) -> Path:
        p = Path(ref)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def actor(self, actor_id: str) -> SceneActor:
        for a in self.actors:
            if a.id == actor_id:
                return a
        raise KeyError(actor_id)


def resolve_mobility(actor: SceneActor) -> Mobility:
    """The override wins when present; otherwise the actor's native mobility."""
    if actor.physics.mobility_override is not None:
        return Mobility(actor.physics.mobility_override)
    return Mobility(actor.native_mobility)


# -- JSON ingestion ---------------------------------------------------------

class _Ctx:
    def __init__(self, source):
        self.source = source

    def fail(self, where, msg):
        raise SceneError(f"{self.source}: {where}: {msg}")


def _vec(ctx, where, value, n, default=None):
    if value is None:
        if default is None:
            ctx.fail(where, "missing")
        return tuple(float(v) for v in default)
    if not isinstance(value, (list, tuple)) or len(value) != n:
        ctx.fail(where, f"expected a list of {n} numbers, got {value!r}")
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        ctx.fail(where, f"non-numeric entry in {value!r}")
    if not all(math.isfinite(v) for v in out):
        ctx.fail(where, "non-finite value")
    return out


def _transform(ctx, where, d):
    if d is None:
        return Transform()
    if not isinstance(d, dict):
        ctx.fail(where, "expected an object")
    unknown = set(d) - {"pos", "quat", "scale"}
    if unknown:
        ctx.fail(where, f"unknown keys {sorted(unknown)}")
    quat = _vec(ctx, f"{where}.quat", d.get("quat"), 4, (1, 0, 0, 0))
    n = math.sqrt(sum(c * c for c in quat))
    # tolerate hand-typed quaternions but store an exactly normalised one
    if abs(n - 1.0) > 1e-3:
        ctx.fail(f"{where}.quat", f"not a unit quaternion (norm {n:.6g})")
    if n != 1.0 and abs(n - 1.0) > 1e-12:
        quat = tuple(c / n for c in quat)
    try:
        return Transform(
            _vec(ctx, f"{where}.pos", d.get("pos"), 3, (0, 0, 0)),
            quat,
            _vec(ctx, f"{where}.scale", d.get("scale"), 3, (1, 1, 1)),
        )
    except SceneError as exc:
        ctx.fail(where, str(exc))


def _enum(ctx, where, cls, value, default):
    if value is None:
        return default
    try:
        return cls(value)
    except ValueError:
        ctx.fail(where, f"expected one of {[m.value for m in cls]}, got {value!r}")


def _mesh_ref(ctx, where, raw, base_dir, check_files):
    if isinstance(raw, str):
        if check_files and not (Path(raw) if os.path.isabs(raw) else Path(base_dir) / raw).is_file():
            ctx.fail(where, f"dangling mesh reference {raw!r}")
        return raw
    if isinstance(raw, dict) and len(raw) == 1:
        if "sphere" in raw:
            r = raw["sphere"]
            if not isinstance(r, (int, float)) or not r > 0:
                ctx.fail(f"{where}.sphere", f"radius must be a positive number, got {r!r}")
            return Sphere(float(r))
        if "box" in raw:
            he = _vec(ctx, f"{where}.box", raw["box"], 3)
            if any(not h > 0 for h in he):
                ctx.fail(f"{where}.box", "half extents must be > 0")
            return Box(he)
    ctx.fail(where, f"expected an OBJ path, {{'sphere': r}} or {{'box': [hx, hy, hz]}}, got {raw!r}")


def _number(ctx, where, value, default):
    if value is None:
        return float(default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        ctx.fail(where, f"expected a number, got {value!r}")
    return float(value)


def _actor(ctx, where, d, base_dir, check_files):
    if not isinstance(d, dict):
        ctx.fail(where, "expected an object")
    unknown = set(d) - {"id", "mesh", "transform", "physics", "native_mobility", "include_in_heightfield"}
    if unknown:
        ctx.fail(where, f"unknown keys {sorted(unknown)}")
    aid = d.get("id")
    if not isinstance(aid, str) or not aid:
        ctx.fail(f"{where}.id", "expected a non-empty string")
    if "mesh" not in d:
        ctx.fail(f"{where}.mesh", "missing")
    mesh = _mesh_ref(ctx, f"{where}.mesh", d["mesh"], base_dir, check_files)
    tf = _transform(ctx, f"{where}.transform", d.get("transform"))
    if not isinstance(mesh, str) and not tf.uniform_scale:
        ctx.fail(f"{where}.transform.scale", "non-uniform scale is only supported for OBJ meshes")
    p = d.get("physics") or {}
    if not isinstance(p, dict):
        ctx.fail(f"{where}.physics", "expected an object")
    unknown = set(p) - {"complexity", "mobility", "mass", "friction", "restitution"}
    if unknown:
        ctx.fail(f"{where}.physics", f"unknown keys {sorted(unknown)}")
    try:
        phys = PhysicsComponent(
            complexity=_enum(ctx, f"{where}.physics.complexity", Complexity, p.get("complexity"), Complexity.SIMPLE),
            mobility_override=_enum(ctx, f"{where}.physics.mobility", Mobility, p.get("mobility"), None),
            mass=_number(ctx, f"{where}.physics.mass", p.get("mass"), 1.0),
            friction=_number(ctx, f"{where}.physics.friction", p.get("friction"), 0.5),
            restitution=_number(ctx, f"{where}.physics.restitution", p.get("restitution"), 0.0),
        )
    except SceneError as exc:
        ctx.fail(f"{where}.physics", str(exc))
    actor = SceneActor(
        id=aid,
        mesh=mesh,
        transform=tf,
        physics=phys,
        native_mobility=_enum(ctx, f"{where}.native_mobility", Mobility, d.get("native_mobility"), Mobility.STATIC),
        include_in_heightfield=bool(d.get("include_in_heightfield", False)),
    )
    if resolve_mobility(actor) is Mobility.DYNAMIC and not actor.physics.mass > 0:
        ctx.fail(f"{where}.physics.mass", "dynamic actors need mass > 0")
    return actor


def _landscape(ctx, where, d, index, base_dir, check_files):
    if not isinstance(d, dict):
        ctx.fail(where, "expected an object")
    mesh = d.get("mesh")
    if not isinstance(mesh, str):
        ctx.fail(f"{where}.mesh", "expected an OBJ path")
    if check_files and not (Path(base_dir) / mesh).is_file() and not Path(mesh).is_file():
        ctx.fail(f"{where}.mesh", f"dangling mesh reference {mesh!r}")
    bbox = d.get("bbox")
    if not isinstance(bbox, dict):
        ctx.fail(f"{where}.bbox", "expected {min: [3], max: [3]}")
    res = d.get("resolution", [64, 64])
    if not isinstance(res, (list, tuple)) or len(res) != 2 or not all(isinstance(r, int) for r in res):
        ctx.fail(f"{where}.resolution", f"expected [nx, ny] integers, got {res!r}")
    try:
        return LandscapeRegion(
            id=str(d.get("id", f"landscape_{index}")),
            mesh=mesh,
            bbox_min=_vec(ctx, f"{where}.bbox.min", bbox.get("min"), 3),
            bbox_max=_vec(ctx, f"{where}.bbox.max", bbox.get("max"), 3),
            resolution=tuple(res),
        )
    except SceneError as exc:
        ctx.fail(where, str(exc))


def _robot(ctx, where, d, base_dir, check_files):
    if not isinstance(d, dict):
        ctx.fail(where, "expected an object")
    rid = d.get("id")
    if not isinstance(rid, str) or not rid:
        ctx.fail(f"{where}.id", "expected a non-empty string")
    path = d.get("spec")
    if not isinstance(path, str):
        ctx.fail(f"{where}.spec", "expected a path to a robot XML file")
    full = Path(path) if os.path.isabs(path) else Path(base_dir) / path
    if check_files:
        if not full.is_file():
            ctx.fail(f"{where}.spec", f"robot spec {path!r} not found")
        from .spec.mjcf import parse_xml

        try:
            parse_xml(full.read_text(encoding="utf-8"), base_dir=full.parent)
        except Exception as exc:  # surfaced with field context
            ctx.fail(f"{where}.spec", f"robot spec does not parse: {exc}")
    return RobotPawn(rid, path, _transform(ctx, f"{where}.spawn", d.get("spawn")))


def scene_from_dict(data, source="<scene>", base_dir=".", check_files=True) -> SceneDescription:
    ctx = _Ctx(source)
    if not isinstance(data, dict):
        ctx.fail("$", "top level must be an object")
    unknown = set(data) - {"actors", "landscapes", "robots", "gravity"}
    if unknown:
        ctx.fail("$", f"unknown keys {sorted(unknown)}")
    for key in ("actors", "landscapes", "robots"):
        if not isinstance(data.get(key, []), list):
            ctx.fail(key, "expected a list")
    actors = tuple(_actor(ctx, f"actors[{i}]", a, base_dir, check_files) for i, a in enumerate(data.get("actors", [])))
    landscapes = tuple(
        _landscape(ctx, f"landscapes[{i}]", l, i, base_dir, check_files) for i, l in enumerate(data.get("landscapes", []))
    )
    robots = tuple(_robot(ctx, f"robots[{i}]", r, base_dir, check_files) for i, r in enumerate(data.get("robots", [])))
    seen = {}
    for kind, items in (("actors", actors), ("robots", robots)):
        for i, item in enumerate(items):
            if item.id in seen:
                raise DuplicateIdError(f"{source}: {kind}[{i}].id: duplicate id {item.id!r} (first used by {seen[item.id]})")
            seen[item.id] = f"{kind}[{i}]"
    return SceneDescription(
        actors=actors,
        landscapes=landscapes,
        robots=robots,
        gravity=_vec(ctx, "gravity", data.get("gravity"), 3, DEFAULT_GRAVITY),
        base_dir=str(base_dir),
    )


def load_scene(path) -> SceneDescription:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SceneError(f"{path}: not valid UTF-8 ({exc})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return scene_from_dict(data, source=str(path), base_dir=str(path.parent))


def _transform_dict(t: Transform):
    return {"pos": list(t.position), "quat": list(t.orientation), "scale": list(t.scale)}


def scene_to_dict(scene: SceneDescription) -> dict:
    def mesh(m):
        if isinstance(m, Sphere):
            return {"sphere": m.radius}
        if isinstance(m, Box):
            return {"box": list(m.half_extents)}
        return m

    actors = []
    for a in scene.actors:
        phys = {
            "complexity": a.physics.complexity.value,
            "mass": a.physics.mass,
            "friction": a.physics.friction,
            "restitution": a.physics.restitution,
        }
        if a.physics.mobility_override is not None:
            phys["mobility"] = a.physics.mobility_override.value
        d = {
            "id": a.id,
            "mesh": mesh(a.mesh),
            "transform": _transform_dict(a.transform),
            "physics": phys,
            "native_mobility": a.native_mobility.value,
        }
        if a.include_in_heightfield:
            d["include_in_heightfield"] = True
        actors.append(d)
    return {
        "actors": actors,
        "landscapes": [
            {
                "id": l.id,
                "mesh": l.mesh,
                "bbox": {"min": list(l.bbox_min), "max": list(l.bbox_max)},
                "resolution": list(l.resolution),
            }
            for l in scene.landscapes
        ],
        "robots": [{"id": r.id, "spec": r.spec_path, "spawn": _transform_dict(r.spawn)} for r in scene.robots],
        "gravity": list(scene.gravity),
    }


def save_scene(scene: SceneDescription, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n", encoding="utf-8")
