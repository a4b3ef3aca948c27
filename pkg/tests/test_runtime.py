import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ball, resting_spec
from simbridge.errors import InputError, RuntimeStateError
from simbridge.physics import World
from simbridge.runtime import Runtime, RuntimeConfig, Snapshot, latest, payload_checksum, push_force, start, stop
from simbridge.spec import PhysicsSpec


def falling(hz=1000.0):
    return World(PhysicsSpec(bodies=[ball("s", (0, 0, 0), m=2.0)]), dt=1.0 / hz)


def test_free_run_thousand_steps_is_one_second():
    rt = start(falling(), RuntimeConfig(max_steps=1000))
    snap = rt.wait(30)
    assert snap.step == 1000 and snap.sim_time == 1.0 and snap.terminal
    assert snap.valid()


def test_max_steps_zero_gives_initial_snapshot():
    rt = start(falling(), RuntimeConfig(max_steps=0))
    snap = rt.wait(5)
    assert snap.step == 0 and snap.sim_time == 0.0
    assert stop(rt).step == 0


def test_poll_before_first_step():
    w = falling()
    rt = Runtime(w, RuntimeConfig(max_steps=5))
    seen = []
    rt.add_observer(seen.append)
    rt.start()
    rt.wait(5)
    assert seen[0].step == 0 and [s.step for s in seen] == list(range(6))


def test_latest_is_monotone_and_valid():
    rt = start(falling(), RuntimeConfig(max_steps=3000))
    steps = []
    while rt.running:
        s = latest(rt)
        assert s.valid()
        steps.append(s.step)
    steps.append(rt.latest().step)
    assert steps == sorted(steps) and steps[-1] == 3000


def test_realtime_pacing():
    t0 = time.perf_counter()
    rt = start(falling(), RuntimeConfig(realtime=True, max_steps=1000))
    rt.wait(5)
    wall = time.perf_counter() - t0
    assert 0.9 <= wall <= 1.1


def test_double_start_rejected():
    w = falling()
    rt = start(w, RuntimeConfig(realtime=True))
    try:
        with pytest.raises(RuntimeStateError):
            start(w, RuntimeConfig(realtime=True))
        with pytest.raises(RuntimeStateError):
            rt.start()
    finally:
        rt.stop()
    # once stopped, the world may be driven again
    stop(start(w, RuntimeConfig(max_steps=w.step_count + 1)))


def test_unstarted_handle():
    rt = Runtime(falling(), RuntimeConfig())
    with pytest.raises(RuntimeStateError):
        rt.latest()
    with pytest.raises(RuntimeStateError):
        rt.stop()


def test_stop_is_idempotent_and_joins():
    w = falling()
    rt = start(w, RuntimeConfig(realtime=True))
    time.sleep(0.05)
    first = rt.stop()
    assert first.terminal and not rt.running
    assert first.step == w.step_count
    assert rt.stop() is first and rt.latest() is first


def test_bad_config():
    with pytest.raises(InputError):
        RuntimeConfig(physics_hz=0)
    with pytest.raises(InputError):
        RuntimeConfig(max_steps=-1)
    with pytest.raises(InputError):
        Runtime(falling(500.0), RuntimeConfig(physics_hz=1000.0))


def test_push_force_hover_via_observer():
    w = World(PhysicsSpec(bodies=[ball("s", (0, 0, 0), m=2.0)]))
    w.set_velocity("s", (0, 0, 0.25))
    rt = Runtime(w, RuntimeConfig(max_steps=500))
    rt.add_observer(lambda snap: rt.push_force("s", (0, 0, 2.0 * 9.81)))
    rt.start()
    snap = rt.wait(10)
    assert abs(snap.body("s").linear_velocity[2] - 0.25) <= 1e-9


def test_push_zero_force_identity():
    def final(push):
        w = falling()
        rt = Runtime(w, RuntimeConfig(max_steps=300))
        if push:
            rt.add_observer(lambda s: rt.push_force("s", (0, 0, 0)))
        rt.start()
        return rt.wait(10).checksum
    assert final(True) == final(False)


def test_push_force_unknown_body_reported():
    rt = start(falling(), RuntimeConfig(realtime=True, max_steps=200))
    push_force(rt, "ghost", (1, 0, 0))
    rt.wait(5)
    assert any("ghost" in str(e) for e in rt.errors)


def test_snapshot_immutable_and_checksum_detects_tamper():
    rt = start(World(resting_spec()), RuntimeConfig(max_steps=10))
    snap = rt.wait(5)
    with pytest.raises(Exception):
        snap.step = 5
    with pytest.raises(ValueError):
        snap.bodies[1].position[0] = 1.0
    forged = Snapshot(snap.sim_time, snap.step + 1, snap.bodies, snap.readings, snap.contacts, snap.checksum)
    assert not forged.valid()
    assert payload_checksum(snap.sim_time, snap.step, snap.bodies, snap.readings, snap.contacts) == snap.checksum


def test_concurrent_pollers_see_valid_monotone_snapshots():
    rt = start(World(resting_spec()), RuntimeConfig(max_steps=4000))
    logs = {0: [], 1: []}
    bad = []

    def poll(k, period):
        while rt.running:
            s = rt.latest()
            if not s.valid():
                bad.append(s.step)
            logs[k].append(s.step)
            time.sleep(period)
    threads = [threading.Thread(target=poll, args=(0, 0.0)), threading.Thread(target=poll, args=(1, 0.001))]
    for t in threads:
        t.start()
    for t in threads:
        t.join(30)
    assert not bad
    for seq in logs.values():
        assert seq and seq == sorted(seq)


@pytest.mark.parametrize("consumers", [0, 1, 4])
def test_consumers_do_not_change_trajectory(consumers):
    def trajectory(n):
        rt = start(World(resting_spec()), RuntimeConfig(max_steps=1500))
        stop_flag = threading.Event()

        def poll():
            while not stop_flag.is_set():
                rt.latest().valid()
        ts = [threading.Thread(target=poll) for _ in range(n)]
        for t in ts:
            t.start()
        snap = rt.wait(60)
        stop_flag.set()
        for t in ts:
            t.join()
        return rt.world.state_vector().tobytes(), snap.checksum
    baseline = trajectory(0)
    assert trajectory(consumers) == baseline


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 300))
def test_step_count_matches_max_steps(n):
    rt = start(falling(), RuntimeConfig(max_steps=n))
    snap = rt.wait(10)
    assert snap.step == n and rt.world.step_count == n
    assert snap.sim_time == pytest.approx(n * 1e-3, abs=1e-15)
    assert np.isfinite(snap.body("s").position).all()
