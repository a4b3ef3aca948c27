"""Narrowphase collision: analytic sphere tests, GJK distance, EPA depth, heightfield tests.

Every routine reports contacts as ``(point, normal, depth)`` with the normal
pointing from the first shape to the second.
"""
from __future__ import annotations

import math

import numpy as np

GJK_MAX_ITERS = 64
EPA_MAX_FACES = 64
_GJK_REL_EPS = 1e-12
_EPA_TOL = 1e-9


def cross(a, b):
    """3-vector cross product; much cheaper than ``np.cross`` for single vectors."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


# -- shapes posed in the world ---------------------------------------------

class Posed:
    """A geom resolved to world coordinates for one step."""

    __slots__ = ("kind", "pos", "rot", "radius", "half", "verts", "local_verts", "planes", "hfield", "aabb", "center")

    def __init__(self, kind, pos, rot, radius=0.0, half=None, local_verts=None, planes=None, hfield=None):
        self.kind = kind
        self.pos = pos
        self.rot = rot
        self.radius = radius
        self.half = half
        self.local_verts = local_verts
        self.planes = planes
        self.hfield = hfield
        self.verts = None
        if kind == "sphere":
            r = np.full(3, radius)
            self.aabb = (pos - r, pos + r)
            self.center = pos
        elif kind == "box":
            ext = np.abs(rot) @ half
            self.aabb = (pos - ext, pos + ext)
            signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
            self.verts = pos + (signs * half) @ rot.T
            self.center = pos
        elif kind == "mesh":
            self.verts = pos + local_verts @ rot.T
            self.aabb = (self.verts.min(axis=0), self.verts.max(axis=0))
            self.center = self.verts.mean(axis=0)
        else:  # hfield, always static and unrotated
            hf = hfield
            lo = np.array([hf.origin[0], hf.origin[1], hf.base])
            hi = np.array([hf.origin[0] + hf.extent[0], hf.origin[1] + hf.extent[1], float(hf.heights.max())])
            self.aabb = (lo, hi)
            self.center = 0.5 * (lo + hi)

    def support(self, d):
        if self.kind == "sphere":
            return self.pos.copy()  # core point; the radius is handled as a margin
        if self.kind == "box":
            local = self.rot.T @ d
            return self.pos + self.rot @ np.where(local >= 0.0, self.half, -self.half)
        return self.verts[int(np.argmax(self.verts @ d))]

    def contains(self, pts, tol=1e-9):
        if self.kind == "box":
            local = (pts - self.pos) @ self.rot
            return np.all(np.abs(local) <= self.half + tol, axis=1)
        local = (pts - self.pos) @ self.rot
        normals, offsets = self.planes
        return np.all(local @ normals.T - offsets <= tol, axis=1)


# -- simplex closest point --------------------------------------------------

def _closest_segment(a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = -float(a @ ab) / denom if denom > 0 else 0.0
    if t <= 0.0:
        return a, (0,), (1.0,)
    if t >= 1.0:
        return b, (1,), (1.0,)
    return a + t * ab, (0, 1), (1.0 - t, t)


def _closest_triangle(a, b, c):
    ab, ac = b - a, c - a
    d1, d2 = -float(ab @ a), -float(ac @ a)
    if d1 <= 0.0 and d2 <= 0.0:
        return a, (0,), (1.0,)
    d3, d4 = -float(ab @ b), -float(ac @ b)
    if d3 >= 0.0 and d4 <= d3:
        return b, (1,), (1.0,)
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab, (0, 1), (1.0 - v, v)
    d5, d6 = -float(ab @ c), -float(ac @ c)
    if d6 >= 0.0 and d5 <= d6:
        return c, (2,), (1.0,)
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac, (0, 2), (1.0 - w, w)
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), (1, 2), (1.0 - w, w)
    denom = va + vb + vc
    if denom == 0.0:  # degenerate triangle: fall back to its longer edge from a
        if float(ab @ ab) >= float(ac @ ac):
            return _closest_segment(a, b)
        q, idx, lam = _closest_segment(a, c)
        return q, tuple(2 if k else 0 for k in idx), lam
    v, w = vb / denom, vc / denom
    return a + ab * v + ac * w, (0, 1, 2), (1.0 - v - w, v, w)


_TET_FACES = ((0, 1, 2, 3), (0, 2, 3, 1), (0, 3, 1, 2), (1, 3, 2, 0))


def _closest_tetra(p):
    best = None
    outside_any = False
    for i, j, k, l in _TET_FACES:
        a, b, c, d = p[i], p[j], p[k], p[l]
        n = cross(b - a, c - a)
        so = -float(n @ a)
        sd = float(n @ (d - a))
        if sd * so < 0.0 or sd == 0.0:  # origin and the fourth vertex on opposite sides
            outside_any = True
            q, idx, lam = _closest_triangle(a, b, c)
            dist = float(q @ q)
            if best is None or dist < best[0]:
                best = (dist, q, tuple((i, j, k)[m] for m in idx), lam)
    if not outside_any:
        return None
    return best[1], best[2], best[3]


def _closest_simplex(pts):
    n = len(pts)
    if n == 1:
        return pts[0], (0,), (1.0,)
    if n == 2:
        return _closest_segment(pts[0], pts[1])
    if n == 3:
        return _closest_triangle(pts[0], pts[1], pts[2])
    return _closest_tetra(pts)


def gjk(shape_a, shape_b):
    """Distance between the cores of two convex shapes.

    Returns ``(distance, point_on_a, point_on_b, simplex)``; distance 0 means
    the cores overlap and ``simplex`` holds (w, a, b) triples enclosing the
    origin of the Minkowski difference A - B.
    """
    d = shape_b.center - shape_a.center
    if float(d @ d) == 0.0:
        d = np.array([1.0, 0.0, 0.0])
    sa, sb = shape_a.support(-d), shape_b.support(d)
    simplex = [(sa - sb, sa, sb)]
    lam = (1.0,)
    v = simplex[0][0]
    for _ in range(GJK_MAX_ITERS):
        vv = float(v @ v)
        if vv <= 1e-24:
            return 0.0, None, None, simplex
        sa, sb = shape_a.support(-v), shape_b.support(v)
        w = sa - sb
        if vv - float(v @ w) <= _GJK_REL_EPS * vv or any(np.array_equal(w, s[0]) for s in simplex):
            break
        simplex.append((w, sa, sb))
        res = _closest_simplex([s[0] for s in simplex])
        if res is None:
            return 0.0, None, None, simplex
        v, idx, lam = res
        simplex = [simplex[i] for i in idx]
    pa = sum(l * s[1] for l, s in zip(lam, simplex))
    pb = sum(l * s[2] for l, s in zip(lam, simplex))
    return math.sqrt(max(float(v @ v), 0.0)), pa, pb, simplex


def _blow_up(shape_a, shape_b, simplex):
    """Grow a lower-dimensional simplex around the origin into a tetrahedron."""
    axes = [np.array(a, dtype=float) for a in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))]
    pts = list(simplex)

    def add(d):
        sa, sb = shape_a.support(d), shape_b.support(-d)
        w = sa - sb
        if all(float(np.linalg.norm(w - p[0])) > 1e-12 for p in pts):
            pts.append((w, sa, sb))
            return True
        return False

    if len(pts) == 1:
        for d in axes:
            if add(d):
                break
    if len(pts) == 2:
        seg = pts[1][0] - pts[0][0]
        for ax in axes[::2]:
            d = cross(seg, ax)
            if float(d @ d) > 1e-18 and (add(d) or add(-d)):
                break
    if len(pts) == 3:
        n = cross(pts[1][0] - pts[0][0], pts[2][0] - pts[0][0])
        if float(n @ n) > 1e-24:
            add(n) or add(-n)
    if len(pts) < 4:
        return None
    w = [p[0] for p in pts]
    if abs(float(cross(w[1] - w[0], w[2] - w[0]) @ (w[3] - w[0]))) < 1e-18:
        return None
    return pts


def epa(shape_a, shape_b, simplex, max_faces=EPA_MAX_FACES):
    """Penetration normal (a -> b), depth and witness points from a GJK simplex."""
    pts = _blow_up(shape_a, shape_b, simplex) if len(simplex) < 4 else list(simplex)
    if pts is None:
        return None
    verts = list(pts)
    faces = []

    def make(i, j, k):
        a, b, c = verts[i][0], verts[j][0], verts[k][0]
        n = cross(b - a, c - a)
        nn = math.sqrt(float(n @ n))
        if nn < 1e-300:
            return None
        n = n / nn
        return [i, j, k, n, float(n @ a)]

    for i, j, k, l in _TET_FACES:
        f = make(i, j, k)
        if f is None:
            return None
        if float(f[3] @ (verts[l][0] - verts[i][0])) > 0.0:
            f = make(i, k, j)
        faces.append(f)
    best = None
    while True:
        best = min(range(len(faces)), key=lambda t: (faces[t][4], t))
        _, _, _, n, dist = faces[best]
        sa, sb = shape_a.support(n), shape_b.support(-n)
        w = sa - sb
        if float(n @ w) - dist <= _EPA_TOL * max(1.0, abs(dist)) or len(faces) >= max_faces:
            break
        visible = [t for t, f in enumerate(faces) if float(f[3] @ (w - verts[f[0]][0])) > 1e-12]
        if not visible:
            break
        edges = set()
        for t in visible:
            i, j, k = faces[t][:3]
            for e in ((i, j), (j, k), (k, i)):
                if (e[1], e[0]) in edges:
                    edges.discard((e[1], e[0]))
                else:
                    edges.add(e)
        keep = [f for t, f in enumerate(faces) if t not in set(visible)]
        verts.append((w, sa, sb))
        new = len(verts) - 1
        added = []
        for i, j in sorted(edges):
            f = make(i, j, new)
            if f is None:
                continue
            added.append(f)
        if not added:
            break
        faces = keep + added
    i, j, k, n, dist = faces[best]
    a, b, c = verts[i][0], verts[j][0], verts[k][0]
    p = n * dist
    bary = _barycentric(p, a, b, c)
    pa = sum(l * verts[m][1] for l, m in zip(bary, (i, j, k)))
    pb = sum(l * verts[m][2] for l, m in zip(bary, (i, j, k)))
    return n, max(dist, 0.0), pa, pb


def _barycentric(p, a, b, c):
    v0, v1, v2 = b - a, c - a, p - a
    d00, d01, d11 = float(v0 @ v0), float(v0 @ v1), float(v1 @ v1)
    d20, d21 = float(v2 @ v0), float(v2 @ v1)
    den = d00 * d11 - d01 * d01
    if den == 0.0:
        return (1.0, 0.0, 0.0)
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    return (1.0 - v - w, v, w)


# -- pair tests -------------------------------------------------------------

def sphere_sphere(a: Posed, b: Posed):
    d = b.pos - a.pos
    dist = math.sqrt(float(d @ d))
    depth = a.radius + b.radius - dist
    if depth < 0.0:
        return []
    n = d / dist if dist > 1e-12 else np.array([0.0, 0.0, 1.0])
    point = a.pos + n * (a.radius - 0.5 * depth)
    return [(point, n, depth)]


def sphere_box(s: Posed, box: Posed):
    """Sphere first, box second."""
    local = box.rot.T @ (s.pos - box.pos)
    h = box.half
    clamped = np.clip(local, -h, h)
    diff = local - clamped
    dist = math.sqrt(float(diff @ diff))
    if dist > 1e-12:
        depth = s.radius - dist
        if depth < 0.0:
            return []
        n = -(box.rot @ (diff / dist))
        point = box.pos + box.rot @ clamped
        return [(point, n, depth)]
    # centre inside the box: push out through the nearest face
    gaps = h - np.abs(local)
    axis = int(np.argmin(gaps))
    sign = 1.0 if local[axis] >= 0.0 else -1.0
    out = np.zeros(3)
    out[axis] = sign
    n = -(box.rot @ out)
    face = local.copy()
    face[axis] = sign * h[axis]
    return [(box.pos + box.rot @ face, n, s.radius + float(gaps[axis]))]


def sphere_convex(s: Posed, c: Posed):
    """Sphere (as a point core plus radius) against a box or convex mesh."""
    dist, pa, pb, simplex = gjk(s, c)
    if dist > 0.0:
        depth = s.radius - dist
        if depth < 0.0:
            return []
        n = (pb - pa) / dist
        return [(pb, n, depth)]
    res = epa(s, c, simplex)
    if res is None:
        return []
    n, depth, pa, pb = res
    return [(pb, n, depth + s.radius)]


def convex_convex(a: Posed, b: Posed, max_points=8):
    dist, _, _, simplex = gjk(a, b)
    if dist > 0.0:
        return []
    res = epa(a, b, simplex)
    if res is None:
        return []
    n, depth, pa, pb = res
    if depth <= 0.0:
        return []
    b_lo = float(n @ b.support(-n))
    a_hi = float(n @ a.support(n))
    cand = []
    ins_a = b.contains(a.verts)
    for i in np.flatnonzero(ins_a):
        v = a.verts[i]
        cand.append((min(float(n @ v) - b_lo, depth), 0, int(i), v))
    ins_b = a.contains(b.verts)
    for i in np.flatnonzero(ins_b):
        v = b.verts[i]
        cand.append((min(a_hi - float(n @ v), depth), 1, int(i), v))
    cand = [c for c in cand if c[0] > 0.0]
    if not cand:
        return [(0.5 * (pa + pb), n, depth)]
    cand.sort(key=lambda c: (-c[0], c[1], c[2]))
    return [(v, n, d) for d, _, _, v in cand[:max_points]]


# -- heightfield ------------------------------------------------------------

def _hf_surface(hf, x, y):
    """Height and upward unit normal of the cell triangle under (x, y); None outside."""
    fx = (x - hf.origin[0]) / hf.cell[0]
    fy = (y - hf.origin[1]) / hf.cell[1]
    if fx < 0.0 or fy < 0.0 or fx > hf.nx - 1 or fy > hf.ny - 1:
        return None
    i = min(int(fx), hf.nx - 2)
    j = min(int(fy), hf.ny - 2)
    u, v = fx - i, fy - j
    h = hf.heights
    h00, h10, h01, h11 = h[j, i], h[j, i + 1], h[j + 1, i], h[j + 1, i + 1]
    dx, dy = hf.cell
    # cells split along the (0,0)-(1,1) diagonal
    if u >= v:
        z = h00 + u * (h10 - h00) + v * (h11 - h10)
        gx, gy = (h10 - h00) / dx, (h11 - h10) / dy
    else:
        z = h00 + u * (h11 - h01) + v * (h01 - h00)
        gx, gy = (h11 - h01) / dx, (h01 - h00) / dy
    n = np.array([-gx, -gy, 1.0])
    return float(z), n / math.sqrt(float(n @ n))


def _hf_triangles(hf, lo, hi):
    """World triangles of cells overlapping the xy box [lo, hi]."""
    i0 = max(int(math.floor((lo[0] - hf.origin[0]) / hf.cell[0])), 0)
    j0 = max(int(math.floor((lo[1] - hf.origin[1]) / hf.cell[1])), 0)
    i1 = min(int(math.floor((hi[0] - hf.origin[0]) / hf.cell[0])), hf.nx - 2)
    j1 = min(int(math.floor((hi[1] - hf.origin[1]) / hf.cell[1])), hf.ny - 2)
    out = []
    for j in range(j0, j1 + 1):
        for i in range(i0, i1 + 1):
            x0 = hf.origin[0] + i * hf.cell[0]
            y0 = hf.origin[1] + j * hf.cell[1]
            x1, y1 = x0 + hf.cell[0], y0 + hf.cell[1]
            h = hf.heights
            p00 = np.array([x0, y0, h[j, i]])
            p10 = np.array([x1, y0, h[j, i + 1]])
            p01 = np.array([x0, y1, h[j + 1, i]])
            p11 = np.array([x1, y1, h[j + 1, i + 1]])
            out.append((p00, p10, p11))
            out.append((p00, p11, p01))
    return out


def sphere_hfield(s: Posed, hf_shape: Posed):
    """Deepest point of the heightfield surface inside the sphere; hfield first."""
    hf = hf_shape.hfield
    r = s.radius
    best = None
    for idx, (a, b, c) in enumerate(_hf_triangles(hf, s.pos - r, s.pos + r)):
        q, _, _ = _closest_triangle(a - s.pos, b - s.pos, c - s.pos)
        n_tri = cross(b - a, c - a)
        n_tri /= math.sqrt(float(n_tri @ n_tri))
        d = math.sqrt(float(q @ q))
        above = float(n_tri @ (s.pos - a)) >= 0.0
        sd = d if above else -d
        depth = r - sd
        if depth > 0.0 and (best is None or depth > best[0]):
            n = -q / d if (above and d > 1e-9) else n_tri
            best = (depth, s.pos + q, n)
    if best is None:
        return []
    depth, point, n = best
    return [(point, n, depth)]


def vertices_hfield(verts, hf_shape: Posed, max_points=4):
    """Vertex-below-surface test for polytopes; hfield first."""
    hf = hf_shape.hfield
    cand = []
    for idx, v in enumerate(verts):
        surf = _hf_surface(hf, float(v[0]), float(v[1]))
        if surf is None:
            continue
        z, n = surf
        gap = z - float(v[2])
        if gap > 0.0:
            cand.append((gap * float(n[2]), idx, v, n))
    cand.sort(key=lambda c: (-c[0], c[1]))
    return [(v, n, d) for d, _, v, n in cand[:max_points]]


def collide(a: Posed, b: Posed):
    """Dispatch on shape kinds; normals point from ``a`` to ``b``."""
    ka, kb = a.kind, b.kind
    flip = False
    if ka == "hfield" and kb == "hfield":
        return []
    if kb == "hfield" or (kb == "sphere" and ka not in ("sphere", "hfield")):
        a, b, ka, kb, flip = b, a, kb, ka, True
    if ka == "hfield":
        res = sphere_hfield(b, a) if kb == "sphere" else vertices_hfield(b.verts, a)
    elif ka == "sphere" and kb == "sphere":
        res = sphere_sphere(a, b)
    elif ka == "sphere" and kb == "box":
        res = sphere_box(a, b)
    elif ka == "sphere":
        res = sphere_convex(a, b)
    else:
        res = convex_convex(a, b)
    if flip:
        res = [(p, -n, d) for p, n, d in res]
    return res
