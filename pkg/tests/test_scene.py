import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simbridge.errors import DuplicateIdError, SceneError
from simbridge.scene import (
    Complexity,
    Mobility,
    PhysicsComponent,
    SceneActor,
    Sphere,
    Transform,
    load_scene,
    resolve_mobility,
    save_scene,
    scene_from_dict,
)


def write(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return p


def test_minimal_scene_defaults(tmp_path):
    s = load_scene(write(tmp_path, {"actors": [], "landscapes": [], "robots": []}))
    assert s.actors == () and s.landscapes == () and s.robots == ()
    assert s.gravity == (0.0, 0.0, -9.81)


def test_duplicate_actor_ids(tmp_path):
    a = {"id": "crate", "mesh": {"box": [1, 1, 1]}}
    with pytest.raises(DuplicateIdError, match="crate"):
        load_scene(write(tmp_path, {"actors": [a, dict(a)]}))


def test_actor_and_robot_ids_share_namespace(fixtures):
    data = {"actors": [{"id": "r1", "mesh": {"sphere": 1}}], "robots": [{"id": "r1", "spec": "rover.xml"}]}
    with pytest.raises(DuplicateIdError):
        scene_from_dict(data, base_dir=str(fixtures))


def test_warehouse_fixture(fixtures):
    s = load_scene(fixtures / "warehouse.json")
    assert [a.id for a in s.actors] == ["floor", "ball"]
    assert resolve_mobility(s.actor("floor")) is Mobility.STATIC
    assert resolve_mobility(s.actor("ball")) is Mobility.DYNAMIC
    assert s.actor("ball").physics.mass == 2.0


def test_dangling_mesh(tmp_path):
    with pytest.raises(SceneError, match="dangling"):
        load_scene(write(tmp_path, {"actors": [{"id": "a", "mesh": "missing.obj"}]}))


def test_parse_error_has_location(tmp_path):
    with pytest.raises(SceneError, match=r"scene.json:1:\d+"):
        load_scene(write(tmp_path, '{"actors": [,]}'))


def test_field_context_in_errors(tmp_path):
    bad = {"actors": [{"id": "a", "mesh": {"sphere": 1}, "physics": {"friction": -1}}]}
    with pytest.raises(SceneError, match=r"actors\[0\]\.physics"):
        load_scene(write(tmp_path, bad))


def test_transform_invariants():
    with pytest.raises(SceneError):
        Transform(orientation=(1.0, 0.1, 0.0, 0.0))
    with pytest.raises(SceneError):
        Transform(scale=(1.0, 0.0, 1.0))
    Transform(orientation=(0.0, 0.0, 0.0, 1.0))


def test_non_uniform_scale_rejected_for_primitives(tmp_path):
    bad = {"actors": [{"id": "a", "mesh": {"sphere": 1}, "transform": {"scale": [1, 2, 1]}}]}
    with pytest.raises(SceneError, match="non-uniform"):
        load_scene(write(tmp_path, bad))


def test_dynamic_needs_mass(tmp_path):
    bad = {"actors": [{"id": "a", "mesh": {"sphere": 1}, "physics": {"mobility": "Dynamic", "mass": 0}}]}
    with pytest.raises(SceneError, match="mass"):
        load_scene(write(tmp_path, bad))


@pytest.mark.parametrize(
    "override,native,expected",
    [
        (Mobility.STATIC, Mobility.DYNAMIC, Mobility.STATIC),
        (None, Mobility.STATIC, Mobility.STATIC),
        (Mobility.DYNAMIC, Mobility.DYNAMIC, Mobility.DYNAMIC),
        (None, Mobility.DYNAMIC, Mobility.DYNAMIC),
    ],
)
def test_resolve_mobility(override, native, expected):
    a = SceneActor("a", Sphere(1.0), physics=PhysicsComponent(mobility_override=override), native_mobility=native)
    assert resolve_mobility(a) is expected


unit = st.floats(-10, 10, allow_nan=False)
pos_f = st.floats(0.01, 10, allow_nan=False)


@st.composite
def actors(draw, idx):
    q = [draw(st.floats(-1, 1)) for _ in range(4)]
    n = sum(c * c for c in q) ** 0.5
    quat = [1.0, 0.0, 0.0, 0.0] if n < 1e-3 else [c / n for c in q]
    mesh = draw(st.sampled_from([{"sphere": draw(pos_f)}, {"box": [draw(pos_f), draw(pos_f), draw(pos_f)]}]))
    s = draw(pos_f)
    return {
        "id": f"a{idx}",
        "mesh": mesh,
        "transform": {"pos": [draw(unit), draw(unit), draw(unit)], "quat": quat, "scale": [s, s, s]},
        "physics": {
            "complexity": draw(st.sampled_from(["Simple", "Complex"])),
            "mobility": draw(st.sampled_from(["Static", "Dynamic"])),
            "mass": draw(pos_f),
            "friction": draw(st.floats(0, 2)),
            "restitution": draw(st.floats(0, 1)),
        },
    }


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4).flatmap(lambda n: st.tuples(*[actors(i) for i in range(n)])),
       st.tuples(unit, unit, unit))
def test_save_load_identity(tmp_path_factory, acts, gravity):
    d = tmp_path_factory.mktemp("rt")
    s = scene_from_dict({"actors": list(acts), "gravity": list(gravity)}, base_dir=str(d))
    save_scene(s, d / "s.json")
    assert load_scene(d / "s.json") == s


def test_resolve_mobility_closed_set():
    for c in Complexity:
        for o in (None, *Mobility):
            for nat in Mobility:
                a = SceneActor("x", Sphere(1), physics=PhysicsComponent(complexity=c, mobility_override=o),
                               native_mobility=nat)
                r = resolve_mobility(a)
                assert r in (Mobility.STATIC, Mobility.DYNAMIC)
                if o is not None:
                    assert r is o
