"""Approximate convex decomposition by recursive axis-aligned cuts.

A piece whose concavity (hull volume gap) is at or below the threshold is
replaced by its hull.  Otherwise it is split by whichever of 27 candidate
planes (9 offsets per axis, spread between the 10th and 90th percentile of
the piece's vertex coordinates) minimises the hull-volume-weighted sum of
the halves' concavities, i.e. the total hull volume the halves would waste.
Each half is split into connected components and every component is
processed recursively.

Cut pieces stay closed: each open loop left on the cutting plane is capped
by a fan of triangles from a point on the plane, so signed volumes of the
pieces stay exact even for non-convex sections (overlapping fan triangles
cancel).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateError, InputError
from .hull import ConvexPart, convex_hull
from .obj import TriMesh
from .volume import concavity_from, mesh_volume, signed_volume

N_OFFSETS = 9
_EMPTY_VOLUME = 1e-12


class DecompositionWarning(UserWarning):
    """Recursion depth ran out before every part met the concavity threshold."""


@dataclass
class DecompositionResult:
    parts: list
    converged: bool
    leaf_concavities: list = field(default_factory=list)
    cuts: list = field(default_factory=list)


def clip_mesh(mesh: TriMesh, axis: int, offset: float, keep_below: bool) -> TriMesh:
    """Keep the part of a closed mesh on one side of ``x[axis] = offset`` and cap it."""
    v = mesh.vertices
    t = mesh.triangles
    s = v[:, axis] - offset
    if not keep_below:
        s = -s
    st = s[t]
    inside = np.all(st <= 0, axis=1)
    outside = np.all(st >= 0, axis=1)
    flat = inside & outside
    # triangles lying in the plane belong to the side their normal faces away from
    if flat.any():
        tv = v[t[flat]]
        nrm = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])[:, axis]
        keep_flat = nrm > 0 if keep_below else nrm < 0
        inside[np.nonzero(flat)[0][~keep_flat]] = False
    mixed = ~inside & ~outside

    new_verts = []
    cross_ids = {}
    n0 = len(v)

    def crossing(i, j):
        key = (i, j) if i < j else (j, i)
        vid = cross_ids.get(key)
        if vid is None:
            a, b = key
            sa, sb = s[a], s[b]
            p = v[a] + (v[b] - v[a]) * (sa / (sa - sb))
            p[axis] = offset
            vid = cross_ids[key] = n0 + len(new_verts)
            new_verts.append(p)
        return vid

    tris = [t[inside]]
    extra = []
    for tri in t[mixed].tolist():
        poly = []
        for k in range(3):
            i, j = tri[k], tri[(k + 1) % 3]
            if s[i] <= 0:
                poly.append(i)
            if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
                poly.append(crossing(i, j))
        for k in range(1, len(poly) - 1):
            extra.append((poly[0], poly[k], poly[k + 1]))
    if extra:
        tris.append(np.array(extra, dtype=np.int64))
    tri_arr = np.concatenate(tris) if tris else np.zeros((0, 3), dtype=np.int64)
    verts = np.vstack([v, np.array(new_verts).reshape(-1, 3)]) if new_verts else v

    # cap: every directed edge without a twin lies on the cutting plane; each
    # open loop gets its own fan so separate components stay separate
    if len(tri_arr):
        e = np.concatenate([tri_arr[:, [0, 1]], tri_arr[:, [1, 2]], tri_arr[:, [2, 0]]])
        present = set(map(tuple, e.tolist()))
        open_edges = [(a, b) for a, b in e.tolist() if (b, a) not in present]
        if open_edges:
            groups = _group_edges(open_edges)
            caps = []
            centres = []
            for group in groups:
                ring = sorted({a for a, _ in group} | {b for _, b in group})
                centre = verts[ring].mean(axis=0)
                centre[axis] = offset
                cid = len(verts) + len(centres)
                centres.append(centre)
                caps.extend((b, a, cid) for a, b in group)
            verts = np.vstack([verts, np.array(centres)])
            tri_arr = np.concatenate([tri_arr, np.array(caps, dtype=np.int64)])

    used = np.unique(tri_arr) if len(tri_arr) else np.zeros(0, dtype=np.int64)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(verts[used], remap[tri_arr] if len(tri_arr) else tri_arr)


class _DisjointSet:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        root = x
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _group_edges(edges):
    ds = _DisjointSet()
    for a, b in edges:
        ds.union(a, b)
    groups = {}
    for a, b in edges:
        groups.setdefault(ds.find(a), []).append((a, b))
    return [groups[k] for k in sorted(groups)]


def split_components(mesh: TriMesh):
    """Connected components of a mesh (triangles sharing vertices), in first-vertex order."""
    t = mesh.triangles
    if not len(t):
        return []
    ds = _DisjointSet()
    for a, b, c in t.tolist():
        ds.union(a, b)
        ds.union(a, c)
    roots = np.array([ds.find(a) for a in t[:, 0].tolist()])
    uniq = sorted(set(roots.tolist()))
    if len(uniq) == 1:
        return [mesh]
    out = []
    for r in uniq:
        tri = t[roots == r]
        used = np.unique(tri)
        remap = np.full(len(mesh.vertices), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        out.append(TriMesh(mesh.vertices[used], remap[tri]))
    return out


@dataclass
class _Piece:
    mesh: TriMesh
    volume: float
    hull: ConvexPart
    hull_volume: float

    @property
    def concavity(self):
        return concavity_from(self.volume, self.hull_volume)


def _piece(mesh: TriMesh, volume=None):
    if not len(mesh.triangles):
        return None
    if volume is None:
        volume = signed_volume(mesh, origin=mesh.vertices.mean(axis=0))
    if volume <= _EMPTY_VOLUME:
        return None
    try:
        hull = convex_hull(mesh.vertices)
    except DegenerateError:
        return None
    return _Piece(mesh, volume, hull, hull.volume())


def candidate_offsets(mesh: TriMesh, axis: int):
    lo, hi = np.percentile(mesh.vertices[:, axis], [10, 90])
    return np.linspace(lo, hi, N_OFFSETS)


def _side(piece: _Piece, axis, offset, keep_below):
    pieces = [_piece(m) for m in split_components(clip_mesh(piece.mesh, axis, offset, keep_below))]
    return [p for p in pieces if p is not None]


def _evaluate(piece: _Piece, axis: int, offset: float):
    below = _side(piece, axis, offset, True)
    if not below:
        return None
    above = _side(piece, axis, offset, False)
    if not above:
        return None
    # total hull volume not covered by the pieces
    waste = sum(p.hull_volume - p.volume for p in below + above)
    return waste, below, above


def _best_cut(piece: _Piece, pool):
    cands = [(axis, float(off)) for axis in range(3) for off in candidate_offsets(piece.mesh, axis)]
    if pool is None:
        results = [_evaluate(piece, a, o) for a, o in cands]
    else:
        results = list(pool.map(lambda c: _evaluate(piece, *c), cands))
    best = None
    for (axis, off), res in zip(cands, results):
        if res is None:
            continue
        # strict comparison keeps the lowest (axis, offset) on ties
        if best is None or res[0] < best[0][0]:
            best = (res, axis, off)
    return best


def decompose_with_info(mesh: TriMesh, threshold: float = 0.05, max_depth: int = 6, workers: int = 1):
    if not 0 < threshold <= 1:
        raise InputError(f"threshold must be in (0, 1], got {threshold}")
    if max_depth < 0:
        raise InputError(f"max_depth must be >= 0, got {max_depth}")
    if mesh_volume(mesh) <= _EMPTY_VOLUME:
        raise DegenerateError("mesh encloses no volume")
    roots = [p for p in (_piece(m) for m in split_components(mesh)) if p is not None]
    result = DecompositionResult(parts=[], converged=True)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        stack = [(r, 0) for r in reversed(roots)]
        while stack:
            piece, depth = stack.pop()
            c = piece.concavity
            if c <= threshold:
                result.parts.append(piece.hull)
                result.leaf_concavities.append(c)
                continue
            best = None if depth >= max_depth else _best_cut(piece, pool)
            if best is None:
                result.converged = False
                result.parts.append(piece.hull)
                result.leaf_concavities.append(c)
                continue
            (_, below, above), axis, off = best
            result.cuts.append((depth, axis, off))
            # below-first depth-first order
            for child in reversed(below + above):
                stack.append((child, depth + 1))
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def decompose(mesh: TriMesh, threshold: float = 0.05, max_depth: int = 6, workers: int = 1):
    """Split a closed mesh into convex parts; returns the list of hulls."""
    res = decompose_with_info(mesh, threshold, max_depth, workers)
    if not res.converged:
        warnings.warn(
            f"decomposition stopped at depth {max_depth} with parts above concavity {threshold}",
            DecompositionWarning,
            stacklevel=2,
        )
    return res.parts
