"""Landscape to heightfield conversion by bounded downward raycasts."""
from __future__ import annotations

import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .mesh.obj import TriMesh

BARY_TOL = 1e-9
_PARALLEL_EPS = 1e-12
_HEADER = struct.Struct("<4sII5d")
MAGIC = b"HFLD"


class HeightfieldWarning(UserWarning):
    pass


@dataclass(eq=False)
class HeightField:
    """Grid of heights; ``heights[j, i]`` is the sample at ``origin + (i*dx, j*dy)``."""

    nx: int
    ny: int
    origin: tuple
    cell: tuple
    heights: np.ndarray
    base: float

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.float64).reshape(self.ny, self.nx)
        if self.nx < 2 or self.ny < 2:
            raise InputError("heightfield needs at least 2x2 samples")
        if not np.all(np.isfinite(self.heights)):
            raise InputError("heightfield heights must be finite")

    @property
    def extent(self):
        return ((self.nx - 1) * self.cell[0], (self.ny - 1) * self.cell[1])

    def equals(self, other, tol=0.0) -> bool:
        return (
            (self.nx, self.ny) == (other.nx, other.ny)
            and np.allclose(self.origin, other.origin, rtol=0, atol=tol)
            and np.allclose(self.cell, other.cell, rtol=0, atol=tol)
            and abs(self.base - other.base) <= tol
            and bool(np.all(np.abs(self.heights - other.heights) <= tol))
        )


def _ray_hits(origins, direction, tris):
    """Moller-Trumbore distances for rays (R,3) against triangles (T,3,3); NaN on miss."""
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    h = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > _PARALLEL_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origins[:, None, :] - tris[None, :, 0]
    u = np.einsum("rtk,tk->rt", s, h) * inv
    q = np.cross(s, e1[None])
    v = (q @ direction) * inv
    t = np.einsum("tk,rtk->rt", e2, q) * inv
    hit = (
        ok[None]
        & (u >= -BARY_TOL)
        & (v >= -BARY_TOL)
        & (u + v <= 1.0 + BARY_TOL)
        & (t >= 0.0)
    )
    return np.where(hit, t, np.nan)


def ray_triangle(origin, direction, tri):
    """Nearest non-negative hit distance of a ray with a triangle, or None."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise InputError("ray direction must be a unit vector")
    t = _ray_hits(np.asarray(origin, dtype=float).reshape(1, 3), d, np.asarray(tri, dtype=float).reshape(1, 3, 3))[0, 0]
    return None if np.isnan(t) else float(t)


def grid_axes(bbox_min, bbox_max, resolution):
    nx, ny = resolution
    dx = (bbox_max[0] - bbox_min[0]) / (nx - 1)
    dy = (bbox_max[1] - bbox_min[1]) / (ny - 1)
    xs = bbox_min[0] + dx * np.arange(nx)
    ys = bbox_min[1] + dy * np.arange(ny)
    return xs, ys, dx, dy


def _sample_row(y, xs, top, bottom, tris, tri_ymin, tri_ymax):
    sel = (tri_ymin <= y + BARY_TOL) & (tri_ymax >= y - BARY_TOL)
    out = np.full(len(xs), bottom)
    if not sel.any():
        return out
    origins = np.column_stack([xs, np.full(len(xs), y), np.full(len(xs), top)])
    t = _ray_hits(origins, np.array([0.0, 0.0, -1.0]), tris[sel])
    t = np.where(t <= top - bottom, t, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        nearest = np.nanmin(t, axis=1) if t.shape[1] else np.full(len(xs), np.nan)
    hit = ~np.isnan(nearest)
    out[hit] = np.maximum(top - nearest[hit], bottom)
    return out


def sample_heightfield(region, mesh: TriMesh, workers: int = 1, resolution=None) -> HeightField:
    """Cast one ray straight down from the bbox top at every grid node.

    The topmost hit inside the bbox gives the height; a miss gives the bbox
    bottom.  Rows are independent, so any worker count yields identical data.
    """
    lo = np.asarray(region.bbox_min, dtype=float)
    hi = np.asarray(region.bbox_max, dtype=float)
    res = tuple(resolution or region.resolution)
    if not (hi[0] > lo[0] and hi[1] > lo[1]):
        raise InputError("heightfield bbox must have positive x and y extent")
    if len(res) != 2 or min(res) < 2:
        raise InputError("heightfield resolution must be at least 2x2")
    xs, ys, dx, dy = grid_axes(lo, hi, res)
    top, bottom = float(hi[2]), float(lo[2])
    tris = mesh.vertices[mesh.triangles] if len(mesh.triangles) else np.zeros((0, 3, 3))
    if len(tris):
        tmin, tmax = tris.min(axis=1), tris.max(axis=1)
        inside = (
            (tmax[:, 0] >= lo[0] - BARY_TOL) & (tmin[:, 0] <= hi[0] + BARY_TOL)
            & (tmax[:, 1] >= lo[1] - BARY_TOL) & (tmin[:, 1] <= hi[1] + BARY_TOL)
            & (tmax[:, 2] >= bottom) & (tmin[:, 2] <= top)
        )
        tris = tris[inside]
    if not len(tris):
        warnings.warn("no landscape geometry inside the bbox; heightfield is flat at its base", HeightfieldWarning, stacklevel=2)
        heights = np.full((res[1], res[0]), bottom)
    else:
        tymin, tymax = tris[:, :, 1].min(axis=1), tris[:, :, 1].max(axis=1)

        def row(j):
            return _sample_row(float(ys[j]), xs, top, bottom, tris, tymin, tymax)

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                rows = list(pool.map(row, range(res[1])))
        else:
            rows = [row(j) for j in range(res[1])]
        heights = np.vstack(rows)
    return HeightField(res[0], res[1], (float(lo[0]), float(lo[1])), (float(dx), float(dy)), heights, bottom)


def write_hfield(hf: HeightField) -> bytes:
    head = _HEADER.pack(MAGIC, hf.nx, hf.ny, hf.origin[0], hf.origin[1], hf.cell[0], hf.cell[1], hf.base)
    return head + np.ascontiguousarray(hf.heights, dtype="<f8").tobytes()


def read_hfield(data: bytes) -> HeightField:
    if len(data) < _HEADER.size:
        raise InputError("heightfield file truncated")
    magic, nx, ny, ox, oy, dx, dy, base = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InputError(f"bad heightfield magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != 8 * nx * ny:
        raise InputError(f"heightfield body has {len(body)} bytes, expected {8 * nx * ny}")
    return HeightField(nx, ny, (ox, oy), (dx, dy), np.frombuffer(body, dtype="<f8").reshape(ny, nx).copy(), base)
