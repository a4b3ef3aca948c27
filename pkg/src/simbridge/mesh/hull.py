"""3-D quickhull.

The hull is returned as a :class:`ConvexPart`, a triangle mesh whose faces
are outward oriented.  Coplanar facets stay triangulated.
"""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateError
from .obj import TriMesh

_REL_EPS = 1e-9


class ConvexPart(TriMesh):
    """A triangle mesh bounding a convex polytope."""

    @property
    def planes(self):
        """Unit outward face normals and offsets, ``n . x <= d`` inside."""
        cached = getattr(self, "_planes", None)
        if cached is None:
            v = self.vertices[self.triangles]
            n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            cached = self._planes = (n, np.einsum("ij,ij->i", n, v[:, 0]))
        return cached

    def contains(self, points, tol=1e-9):
        n, d = self.planes
        pts = np.atleast_2d(points)
        return np.all(pts @ n.T - d <= tol, axis=1)

    def volume(self) -> float:
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


def _tolerance(pts):
    span = pts.max(axis=0) - pts.min(axis=0)
    scale = float(np.abs(pts).max(axis=0).sum())
    return max(scale, float(span.max())) * 4 * np.finfo(float).eps, float(span.max())


def _initial_simplex(pts, span):
    lo = np.argmin(pts, axis=0)
    hi = np.argmax(pts, axis=0)
    extremes = list(dict.fromkeys(int(i) for i in np.concatenate([lo, hi])))
    best = (-1.0, None)
    for i in range(len(extremes)):
        for j in range(i + 1, len(extremes)):
            d = float(np.sum((pts[extremes[i]] - pts[extremes[j]]) ** 2))
            if d > best[0]:
                best = (d, (extremes[i], extremes[j]))
    if best[1] is None or best[0] <= (_REL_EPS * span) ** 2 or span == 0:
        raise DegenerateError("all points coincide; no 3-D hull")
    a, b = best[1]
    ab = pts[b] - pts[a]
    line_d = np.linalg.norm(np.cross(pts - pts[a], ab), axis=1) / np.linalg.norm(ab)
    c = int(np.argmax(line_d))
    if line_d[c] <= _REL_EPS * span:
        raise DegenerateError("points are collinear; no 3-D hull")
    n = np.cross(ab, pts[c] - pts[a])
    n /= np.linalg.norm(n)
    plane_d = (pts - pts[a]) @ n
    d = int(np.argmax(np.abs(plane_d)))
    if abs(plane_d[d]) <= _REL_EPS * span:
        raise DegenerateError("points are coplanar; no 3-D hull")
    return a, b, c, d


class _Hull:
    def __init__(self, pts, eps):
        self.pts = pts
        self.eps = eps
        self.faces = []  # [a, b, c] or None when deleted
        self.normals = []
        self.offsets = []
        self.outside = []
        self.edges = {}  # directed edge -> face index

    def add_face(self, a, b, c):
        p = self.pts
        n = np.cross(p[b] - p[a], p[c] - p[a])
        norm = np.linalg.norm(n)
        n = n / norm if norm > 0 else n
        fid = len(self.faces)
        self.faces.append((a, b, c))
        self.normals.append(n)
        self.offsets.append(float(n @ p[a]))
        self.outside.append(None)
        for e in ((a, b), (b, c), (c, a)):
            self.edges[e] = fid
        return fid

    def remove_face(self, fid):
        a, b, c = self.faces[fid]
        for e in ((a, b), (b, c), (c, a)):
            if self.edges.get(e) == fid:
                del self.edges[e]
        self.faces[fid] = None
        self.outside[fid] = None

    def assign(self, candidates, fids):
        if not len(candidates) or not fids:
            return
        n = np.array([self.normals[f] for f in fids])
        d = np.array([self.offsets[f] for f in fids])
        dist = self.pts[candidates] @ n.T - d
        best = np.argmax(dist, axis=1)
        keep = dist[np.arange(len(candidates)), best] > self.eps
        for k, fid in enumerate(fids):
            mine = candidates[keep & (best == k)]
            if len(mine):
                self.outside[fid] = mine

    def run(self, simplex):
        a, b, c, d = simplex
        p = self.pts
        interior = p[[a, b, c, d]].mean(axis=0)
        for tri in ((a, b, c), (a, c, d), (a, d, b), (b, d, c)):
            x, y, z = tri
            n = np.cross(p[y] - p[x], p[z] - p[x])
            if n @ (interior - p[x]) > 0:
                tri = (x, z, y)
            self.add_face(*tri)
        rest = np.setdiff1d(np.arange(len(p)), [a, b, c, d])
        self.assign(rest, [0, 1, 2, 3])

        cursor = 0
        while True:
            while cursor < len(self.faces) and (self.faces[cursor] is None or self.outside[cursor] is None):
                cursor += 1
            if cursor >= len(self.faces):
                break
            fid = cursor
            cand = self.outside[fid]
            dist = p[cand] @ self.normals[fid] - self.offsets[fid]
            eye = int(cand[int(np.argmax(dist))])
            visible = self._visible_from(fid, eye)
            horizon = []
            orphans = []
            for vf in visible:
                x, y, z = self.faces[vf]
                for e in ((x, y), (y, z), (z, x)):
                    nb = self.edges.get((e[1], e[0]))
                    if nb not in visible:
                        horizon.append(e)
                if self.outside[vf] is not None:
                    orphans.append(self.outside[vf])
            for vf in visible:
                self.remove_face(vf)
            new = [self.add_face(e[0], e[1], eye) for e in horizon]
            if orphans:
                pool = np.concatenate(orphans)
                self.assign(pool[pool != eye], new)
            cursor = min(cursor, min(new)) if new else cursor

    def _visible_from(self, start, eye):
        q = self.pts[eye]
        visible = {start}
        stack = [start]
        while stack:
            f = stack.pop()
            x, y, z = self.faces[f]
            for e in ((y, x), (z, y), (x, z)):
                nb = self.edges.get(e)
                if nb is None or nb in visible:
                    continue
                if q @ self.normals[nb] - self.offsets[nb] > self.eps:
                    visible.add(nb)
                    stack.append(nb)
        return visible


def convex_hull(points) -> ConvexPart:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateError(f"need at least 4 points for a 3-D hull, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateError("non-finite coordinates")
    eps, span = _tolerance(pts)
    hull = _Hull(pts, eps)
    hull.run(_initial_simplex(pts, span))
    faces = np.array([f for f in hull.faces if f is not None], dtype=np.int64)
    used = np.unique(faces)
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return ConvexPart(pts[used].copy(), remap[faces])
