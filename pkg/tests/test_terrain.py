import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simbridge.errors import InputError
from simbridge.mesh import read_obj
from simbridge.mesh.obj import TriMesh
from simbridge.mesh.shapes import box_mesh
from simbridge.scene import LandscapeRegion
from simbridge.terrain import HeightfieldWarning, ray_triangle, read_hfield, sample_heightfield, write_hfield

TRI = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
DOWN = np.array([0.0, 0.0, -1.0])


def plane(z, lo=-1.0, hi=3.0):
    v = np.array([[lo, lo, z], [hi, lo, z], [hi, hi, z], [lo, hi, z]], float)
    return TriMesh(v, [[0, 1, 2], [0, 2, 3]])


def region(lo, hi, res):
    return LandscapeRegion("r", "unused.obj", tuple(lo), tuple(hi), tuple(res))


def test_ray_hit():
    assert ray_triangle((0.25, 0.25, 1.0), DOWN, TRI) == pytest.approx(1.0, abs=1e-15)


def test_ray_miss_translated():
    assert ray_triangle((0.25, 0.25, 1.0), DOWN, TRI + [2, 0, 0]) is None


def test_ray_parallel():
    assert ray_triangle((0.25, 0.25, 0.0), np.array([1.0, 0, 0]), TRI) is None


def test_ray_behind_origin():
    assert ray_triangle((0.25, 0.25, -1.0), DOWN, TRI) is None


def test_ray_degenerate_triangle():
    assert ray_triangle((0.0, 0.0, 1.0), DOWN, np.array([[0, 0, 0], [1, 1, 0], [2, 2, 0]], float)) is None


@pytest.mark.parametrize("res", [(2, 2), (5, 3), (17, 9)])
def test_flat_plane(res):
    hf = sample_heightfield(region((0, 0, 0), (2, 2, 5), res), plane(2.0))
    assert np.all(hf.heights == 2.0)


def test_ramp_exact(fixtures):
    hf = sample_heightfield(region((0, 0, -1), (2, 1, 3), (3, 2)), read_obj(fixtures / "ramp.obj"))
    assert hf.heights.tolist() == [[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]]


def test_half_ramp_bbox(fixtures):
    hf = sample_heightfield(region((0, 0, -1), (1, 1, 3), (3, 2)), read_obj(fixtures / "ramp.obj"))
    assert hf.heights[0].tolist() == pytest.approx([0.0, 0.5, 1.0], abs=1e-12)


def test_outside_triangles_ignored():
    # a tall wall beyond the bbox must not leak into the samples
    wall = box_mesh((0.5, 5, 10), center=(5, 0, 0))
    both = TriMesh(np.vstack([plane(1.0).vertices, wall.vertices]),
                   np.vstack([plane(1.0).triangles, wall.triangles + 4]))
    hf = sample_heightfield(region((0, 0, 0), (2, 2, 20), (9, 9)), both)
    assert np.all(hf.heights == 1.0)


def test_miss_gives_base_and_empty_warns():
    with pytest.warns(HeightfieldWarning):
        hf = sample_heightfield(region((10, 10, -2), (12, 12, 3), (4, 4)), plane(1.0))
    assert np.all(hf.heights == -2.0)


def test_topmost_surface_wins():
    two = TriMesh(np.vstack([plane(0.5).vertices, plane(1.5).vertices]),
                  np.vstack([plane(0.5).triangles, plane(1.5).triangles + 4]))
    hf = sample_heightfield(region((0, 0, 0), (2, 2, 5), (4, 4)), two)
    assert np.all(hf.heights == 1.5)


def test_clutter_raises_only_its_footprint():
    box = box_mesh((0.25, 0.25, 0.25), center=(1.0, 1.0, 0.25))
    scene = TriMesh(np.vstack([plane(0.0).vertices, box.vertices]),
                    np.vstack([plane(0.0).triangles, box.triangles + 4]))
    hf = sample_heightfield(region((0, 0, -1), (2, 2, 2), (9, 9)), scene)
    xs = np.linspace(0, 2, 9)
    X, Y = np.meshgrid(xs, xs)
    inside = (np.abs(X - 1) <= 0.25) & (np.abs(Y - 1) <= 0.25)
    assert np.all(hf.heights[inside] == 0.5)
    assert np.all(hf.heights[~inside] == 0.0)


def test_worker_independence(fixtures):
    mesh = read_obj(fixtures / "torus.obj")
    r = region((-1.5, -1.5, -1), (1.5, 1.5, 1), (33, 21))
    a = sample_heightfield(r, mesh, workers=1)
    b = sample_heightfield(r, mesh, workers=8)
    assert a.heights.tobytes() == b.heights.tobytes()


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_monotone_refinement(nx, ny, seed):
    rng = np.random.default_rng(seed)
    v = np.column_stack([rng.uniform(-0.5, 2.5, 12), rng.uniform(-0.5, 2.5, 12), rng.uniform(0, 1, 12)])
    mesh = TriMesh(v, rng.integers(0, 12, size=(8, 3)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        coarse = sample_heightfield(region((0, 0, -1), (2, 2, 2), (nx, ny)), mesh)
        fine = sample_heightfield(region((0, 0, -1), (2, 2, 2), (2 * nx - 1, 2 * ny - 1)), mesh)
    assert np.array_equal(fine.heights[::2, ::2], coarse.heights)
    assert np.all(coarse.heights >= coarse.base)


def test_hfield_binary_round_trip(fixtures):
    hf = sample_heightfield(region((0, 0, -1), (2, 1, 3), (3, 2)), read_obj(fixtures / "ramp.obj"))
    data = write_hfield(hf)
    assert data[:4] == b"HFLD" and len(data) == 4 + 8 + 5 * 8 + 6 * 8
    assert read_hfield(data).equals(hf)


def test_invalid_resolution():
    with pytest.raises((InputError, ValueError)):
        sample_heightfield(region((0, 0, 0), (1, 1, 1), (2, 2)), plane(0.5), resolution=(1, 4))
