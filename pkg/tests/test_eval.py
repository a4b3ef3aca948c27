import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import random_rotation, rotation_z
from simbridge.errors import EvalError
from simbridge.evaluation import (
    Episode,
    Trajectory,
    align,
    associate,
    ate,
    coverage,
    cosine,
    evaluate_trajectory,
    image_histogram,
    kl,
    load_episodes,
    load_hist,
    load_trajectory,
    normalize,
    sc,
    scaled_ate,
    umeyama,
)

CUBE = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)


# -- SC ----------------------------------------------------------------------------

def test_sc_examples():
    assert sc([(1, 0), (1, 1)]) == 0.75
    assert sc([(0, 3), (0, 0)]) == 0.0
    assert sc([(1, 2), (1, 2), (1, 0), (1, 0), (1, 0)]) == pytest.approx(0.7333, abs=1e-4)
    with pytest.raises(EvalError):
        sc([])
    for bad in ((2, 0), (1, -1), (1, 0.5)):
        with pytest.raises(EvalError):
            Episode(*bad)


episodes = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 20)), min_size=1, max_size=12)


@settings(max_examples=100, deadline=None)
@given(episodes, st.randoms(use_true_random=False), st.data())
def test_sc_properties(eps, rnd, data):
    v = sc(eps)
    assert 0.0 <= v <= 1.0
    shuffled = list(eps)
    rnd.shuffle(shuffled)
    assert sc(shuffled) == pytest.approx(v, abs=1e-15)
    i = data.draw(st.integers(0, len(eps) - 1))
    bumped = list(eps)
    bumped[i] = (eps[i][0], eps[i][1] + 1)
    assert sc(bumped) <= v


def test_load_episodes(tmp_path):
    p = tmp_path / "e.json"
    p.write_text('{"episodes": [{"success": true, "collisions": 0}, {"success": 1, "collisions": 1}]}')
    assert sc(load_episodes(p)) == 0.75
    p.write_text('[{"success": 1}]')
    with pytest.raises(EvalError, match=r"episodes\[0\]"):
        load_episodes(p)
    p.write_text("{")
    with pytest.raises(EvalError, match="e.json"):
        load_episodes(p)


# -- association and ATE ------------------------------------------------------------

def traj(times, pts):
    return Trajectory(np.asarray(times, float), np.asarray(pts, float))


def test_associate_identity_offset_and_disjoint():
    t = np.arange(10) * 0.1
    pts = np.column_stack([t, t**2, -t])
    g = traj(t, pts)
    p, q = associate(g, traj(t, pts + 1))
    assert np.array_equal(p, pts) and np.array_equal(q, pts + 1)
    p, q = associate(g, traj(t + 0.004, pts), max_dt=0.01)
    assert len(p) == 10
    with pytest.raises(EvalError):
        associate(g, traj(t + 100, pts))


def test_associate_each_estimate_used_once():
    g = traj([0.0, 0.01, 0.02], np.eye(3))
    e = traj([0.011], [[1, 1, 1]])
    p, q = associate(g, e, max_dt=0.02)
    assert len(p) == 1 and np.array_equal(p[0], [0, 1, 0])


def test_ate_examples():
    assert ate(CUBE, CUBE) == 0.0
    assert ate([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [1, 1, 0]]) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    d = np.array([0.3, -1.2, 0.4])
    assert ate(CUBE, CUBE + d) == pytest.approx(np.linalg.norm(d), rel=1e-14)
    with pytest.raises(EvalError):
        ate([], [])


points = arrays(np.float64, st.tuples(st.integers(2, 30), st.just(3)), elements=st.floats(-100, 100))


@settings(max_examples=80, deadline=None)
@given(points, st.integers(0, 2**32 - 1))
def test_ate_nonneg_and_rigid_invariant(p, seed):
    rng = np.random.default_rng(seed)
    q = p + rng.normal(scale=0.5, size=p.shape)
    R, t = random_rotation(rng), rng.normal(size=3) * 10
    base = ate(p, q)
    assert base >= 0
    assert ate(p @ R.T + t, q @ R.T + t) == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert ate(p, p) == 0.0


# -- Umeyama -------------------------------------------------------------------------

def test_umeyama_identity():
    T = umeyama(CUBE, CUBE)
    assert abs(T.scale - 1) < 1e-12
    assert np.allclose(T.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(T.translation, 0, atol=1e-12)


def test_umeyama_recovers_cube_transform():
    R = rotation_z(math.pi / 2)
    gt = 2.0 * CUBE @ R.T + np.array([1, 2, 3])
    T = umeyama(gt, CUBE)
    assert abs(T.scale - 2.0) < 1e-9
    assert np.abs(T.rotation - R).max() < 1e-9
    assert np.abs(T.translation - [1, 2, 3]).max() < 1e-9


def assert_proper(R):
    assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
    assert abs(np.linalg.det(R) - 1) < 1e-9


def test_umeyama_mirrored_input_returns_proper_rotation():
    rng = np.random.default_rng(4)
    q = rng.normal(size=(20, 3))
    mirrored = q * np.array([1.0, 1.0, -1.0])
    T = umeyama(mirrored, q)
    assert T.reflected
    assert_proper(T.rotation)
    # optimal proper fit is no worse than leaving the points where they are
    assert ate(mirrored, T.apply(q)) <= ate(mirrored, q) + 1e-12


def test_umeyama_rank_errors():
    line = np.column_stack([np.arange(5.0), np.zeros(5), np.zeros(5)])
    with pytest.raises(EvalError, match="rank"):
        umeyama(line * 2, line)
    with pytest.raises(EvalError):
        umeyama(CUBE[:2], CUBE[:2])
    with pytest.raises(EvalError):
        umeyama(CUBE, CUBE[:4])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_umeyama_optimality_and_properness(seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(int(rng.integers(4, 60)), 3))
    p = q @ random_rotation(rng).T * rng.uniform(0.2, 5) + rng.normal(size=3) + rng.normal(scale=0.3, size=q.shape)
    T = umeyama(p, q)
    assert_proper(T.rotation)
    assert T.scale > 0
    assert ate(p, T.apply(q)) <= ate(p, q) + 1e-9


# -- coverage and scaled ATE -----------------------------------------------------------

def line_path(n=11, length=10.0):
    x = np.linspace(0, length, n)
    return np.column_stack([x, np.zeros(n), np.zeros(n)])


def test_coverage_examples():
    gt = line_path()
    assert coverage(gt, gt) == 1.0
    assert coverage(gt, gt[:6]) == pytest.approx(0.5, abs=1e-15)
    rng = np.random.default_rng(0)
    assert coverage(gt, gt + rng.normal(scale=0.3, size=gt.shape)) > 1.0
    with pytest.raises(EvalError):
        coverage(np.zeros((4, 3)), gt[:4])
    with pytest.raises(EvalError):
        coverage(gt[:1], gt[:1])


def test_scaled_ate_examples():
    assert scaled_ate(4.23, 0.639) == pytest.approx(6.62, abs=0.005)
    assert scaled_ate(0.475, 0.188) == pytest.approx(2.526, abs=1e-3)
    assert round(scaled_ate(0.475, 0.188), 2) == 2.53
    assert scaled_ate(1.7, 1.0) == 1.7
    for c in (0.0, -0.5, math.nan):
        with pytest.raises(EvalError):
            scaled_ate(1.0, c)


def test_evaluate_trajectory_scale_drift():
    t = np.linspace(0, 10, 101)
    gt = np.column_stack([np.cos(t), np.sin(t), 0.1 * t])
    est = 0.25 * gt @ rotation_z(0.7).T + np.array([5, -1, 2])
    rep = evaluate_trajectory(traj(t, gt), traj(t, est))
    assert rep.ate < 1e-9 and rep.coverage == pytest.approx(1.0, abs=1e-9)
    assert rep.scale == pytest.approx(4.0, rel=1e-9) and rep.pairs == 101
    raw = evaluate_trajectory(traj(t, gt), traj(t, est), do_align=False)
    assert raw.scale is None and raw.ate > 1 and raw.coverage == pytest.approx(0.25, rel=1e-9)


def test_align_returns_mapped_points():
    R = rotation_z(0.3)
    gt = 3 * CUBE @ R.T + 1
    mapped, T = align(gt, CUBE)
    assert np.allclose(mapped, gt, atol=1e-12)


def test_trajectory_csv(tmp_path):
    p = tmp_path / "GlobalPose.csv"
    p.write_text("time_s,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.5,1,2,3,1,0,0,0\n")
    tr = load_trajectory(p)
    assert np.array_equal(tr.times, [0, 0.5]) and np.array_equal(tr.positions[1], [1, 2, 3])
    p.write_text("t,x\n0,0\n")
    with pytest.raises(EvalError, match="time_s"):
        load_trajectory(p)
    p.write_text("time_s,px,py,pz\n0,0,x,0\n")
    with pytest.raises(EvalError, match=":2:"):
        load_trajectory(p)
    with pytest.raises(EvalError):
        Trajectory([0, 0], np.zeros((2, 3)))


# -- vectors --------------------------------------------------------------------------

def test_cosine_examples():
    assert cosine([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 0], [-3, 0]) == -1.0
    with pytest.raises(EvalError):
        cosine([0, 0], [1, 0])
    with pytest.raises(EvalError):
        cosine([1, 0], [1, 0, 0])


vecs = st.integers(1, 40).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements=st.floats(0.01, 100)), arrays(np.float64, n, elements=st.floats(-100, 100))))


@settings(max_examples=100, deadline=None)
@given(vecs, st.floats(0.01, 100), st.floats(0.01, 100))
def test_cosine_symmetric_and_scale_invariant(pq, a, b):
    P, Q = pq
    if not np.any(Q):
        return
    c = cosine(P, Q)
    assert -1 <= c <= 1
    assert cosine(Q, P) == pytest.approx(c, abs=1e-12)
    assert cosine(a * P, b * Q) == pytest.approx(c, abs=1e-12)


def test_kl_examples():
    assert kl([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert kl([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-12)
    assert kl([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.143841, abs=1e-6)
    assert kl([1, 1], [1, 3]) == pytest.approx(0.143841, abs=1e-6)  # normalized internally
    assert kl([0.5, 0.5], [0.25, 0.75], base=2) == pytest.approx(0.143841 / math.log(2), abs=1e-6)
    # zero in Q where P > 0: epsilon floor, then renormalize
    eps = 1e-10
    q = np.array([eps, 1.0]) / (1 + eps)
    p = np.array([0.5, 0.5])
    expect = float(np.sum(p * np.log(p / q)))
    got = kl([0.5, 0.5], [0.0, 1.0])
    assert math.isfinite(got) and got == pytest.approx(expect, rel=1e-12)
    with pytest.raises(EvalError):
        kl([1, 2], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(vecs)
def test_kl_gibbs(pq):
    P, Q = pq
    Q = np.abs(Q)
    if not Q.sum() > 0:
        return
    assert kl(P, Q) >= 0
    assert kl(P, P) == pytest.approx(0.0, abs=1e-12)
    assert abs(normalize(P).sum() - 1) <= 1e-12


def test_image_histogram_and_file(tmp_path):
    gray = np.array([[0, 0], [255, 128]], dtype=np.uint8)
    h = image_histogram(gray)
    assert h.shape == (256,) and h[0] == 2 and h[255] == 1 and h[128] == 1
    rgb = np.zeros((3, 3, 3), dtype=np.uint8)
    rgb[..., 1] = 100  # 0.587 * 100 = 58.7 -> bin 58
    assert image_histogram(rgb)[58] == 9
    p = tmp_path / "a.hist"
    p.write_text("# header\n1, 2 3\n4\n")
    assert np.array_equal(load_hist(p), [1, 2, 3, 4])
    p.write_text("1 two\n")
    with pytest.raises(EvalError, match=":1:"):
        load_hist(p)
    p.write_text("# nothing\n")
    with pytest.raises(EvalError):
        load_hist(p)
