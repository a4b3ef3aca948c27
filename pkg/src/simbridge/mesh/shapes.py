"""Closed triangle meshes for primitives and test fixtures."""
from __future__ import annotations

import math

import numpy as np

from .obj import TriMesh


def box_mesh(half_extents=(0.5, 0.5, 0.5), center=(0.0, 0.0, 0.0)) -> TriMesh:
    hx, hy, hz = half_extents
    v = np.array(
        [[sx * hx, sy * hy, sz * hz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float
    ) + np.asarray(center, dtype=float)
    # vertex index = 4*ix + 2*iy + iz
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriMesh(v, np.array(tris))


def uv_sphere(radius=1.0, segments=16, rings=8, center=(0.0, 0.0, 0.0)) -> TriMesh:
    verts = [(0.0, 0.0, radius)]
    for i in range(1, rings):
        th = math.pi * i / rings
        for j in range(segments):
            ph = 2 * math.pi * j / segments
            verts.append((radius * math.sin(th) * math.cos(ph), radius * math.sin(th) * math.sin(ph), radius * math.cos(th)))
    verts.append((0.0, 0.0, -radius))
    south = len(verts) - 1
    tris = []
    for j in range(segments):
        tris.append((0, 1 + j, 1 + (j + 1) % segments))
    for i in range(rings - 2):
        a0 = 1 + i * segments
        b0 = a0 + segments
        for j in range(segments):
            j1 = (j + 1) % segments
            tris += [(a0 + j, b0 + j, b0 + j1), (a0 + j, b0 + j1, a0 + j1)]
    last = 1 + (rings - 2) * segments
    for j in range(segments):
        tris.append((last + j, south, last + (j + 1) % segments))
    return TriMesh(np.array(verts) + np.asarray(center, dtype=float), np.array(tris))


def _ear_clip(poly):
    """Triangulate a simple counter-clockwise polygon."""
    idx = list(range(len(poly)))
    p = np.asarray(poly, dtype=float)
    out = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(poly) ** 2:
            raise ValueError("polygon is not simple")
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            a, b, c = p[i0], p[i1], p[i2]
            if cross(a, b, c) <= 0:
                continue
            if any(
                cross(a, b, p[m]) >= 0 and cross(b, c, p[m]) >= 0 and cross(c, a, p[m]) >= 0
                for m in idx
                if m not in (i0, i1, i2)
            ):
                continue
            out.append((i0, i1, i2))
            idx.pop(k)
            break
    out.append(tuple(idx))
    return out


def extrude(polygon, depth=1.0) -> TriMesh:
    """Prism over a simple CCW polygon in the xy-plane, z from 0 to depth."""
    n = len(polygon)
    bottom = [(x, y, 0.0) for x, y in polygon]
    top = [(x, y, float(depth)) for x, y in polygon]
    tris = []
    for a, b, c in _ear_clip(polygon):
        tris.append((a, c, b))
        tris.append((n + a, n + b, n + c))
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, n + j), (i, n + j, n + i)]
    return TriMesh(np.array(bottom + top), np.array(tris))


def l_prism(size=2.0, depth=1.0) -> TriMesh:
    """Three of the four quadrant boxes of a size x size square, extruded."""
    h = size / 2
    return extrude([(0, 0), (size, 0), (size, h), (h, h), (h, size), (0, size)], depth)


def c_channel(width=3.0, height=3.0, thickness=0.3, channel_depth=2.0, depth=1.0) -> TriMesh:
    w, hgt, t, d = width, height, thickness, channel_depth
    return extrude([(0, 0), (w, 0), (w, t), (w - d, t), (w - d, hgt - t), (w, hgt - t), (w, hgt), (0, hgt)], depth)


def torus(major=1.0, minor=0.35, major_segments=24, minor_segments=12) -> TriMesh:
    verts = []
    for i in range(major_segments):
        u = 2 * math.pi * i / major_segments
        for j in range(minor_segments):
            w = 2 * math.pi * j / minor_segments
            r = major + minor * math.cos(w)
            verts.append((r * math.cos(u), r * math.sin(u), minor * math.sin(w)))
    tris = []
    for i in range(major_segments):
        i1 = (i + 1) % major_segments
        for j in range(minor_segments):
            j1 = (j + 1) % minor_segments
            a, b = i * minor_segments + j, i1 * minor_segments + j
            c, d = i1 * minor_segments + j1, i * minor_segments + j1
            tris += [(a, b, c), (a, c, d)]
    return TriMesh(np.array(verts), np.array(tris))


def tetrahedron_mesh(points) -> TriMesh:
    p = np.asarray(points, dtype=float)
    tris = [(0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)]
    c = p.mean(axis=0)
    out = []
    for a, b, cc in tris:
        n = np.cross(p[b] - p[a], p[cc] - p[a])
        out.append((a, b, cc) if n @ (p[a] - c) > 0 else (a, cc, b))
    return TriMesh(p, np.array(out))
