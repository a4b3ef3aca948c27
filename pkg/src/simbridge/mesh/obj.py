"""Triangle meshes and the OBJ subset used for collision assets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MeshError, ObjParseError

DEGENERATE_AREA = 1e-12


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        self.triangles = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))

    def validate(self) -> "TriMesh":
        n = len(self.vertices)
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise MeshError(f"triangle index out of range for {n} vertices")
        areas = self.triangle_areas()
        bad = np.nonzero(areas <= DEGENERATE_AREA)[0]
        if len(bad):
            raise MeshError(f"degenerate triangle(s) {bad[:10].tolist()} with area <= {DEGENERATE_AREA}")
        return self

    def triangle_areas(self):
        if not len(self.triangles):
            return np.zeros(0)
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def transformed(self, rot, pos, scale=(1.0, 1.0, 1.0)) -> "TriMesh":
        v = (self.vertices * np.asarray(scale)) @ np.asarray(rot).T + np.asarray(pos)
        return TriMesh(v, self.triangles.copy())

    def equals(self, other, tol=0.0) -> bool:
        return (
            self.vertices.shape == other.vertices.shape
            and np.array_equal(self.triangles, other.triangles)
            and bool(np.all(np.abs(self.vertices - other.vertices) <= tol))
        )

    def __repr__(self):
        return f"TriMesh({len(self.vertices)} vertices, {len(self.triangles)} triangles)"


def parse_obj(text: str) -> TriMesh:
    """Parse ``v``/``f`` records; polygon faces are fan-triangulated."""
    verts = []
    tris = []
    face_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) not in (4, 5):
                raise ObjParseError(f"line {lineno}: vertex record needs 3 coordinates: {raw!r}")
            try:
                verts.append([float(p) for p in parts[1:4]])
            except ValueError:
                raise ObjParseError(f"line {lineno}: bad vertex coordinate: {raw!r}") from None
        elif tag == "f":
            if len(parts) < 4:
                raise ObjParseError(f"line {lineno}: face needs at least 3 indices: {raw!r}")
            try:
                idx = [int(p.split("/", 1)[0]) for p in parts[1:]]
            except ValueError:
                raise ObjParseError(f"line {lineno}: bad face index: {raw!r}") from None
            face_lines.append((lineno, idx))
        elif tag in ("vn", "vt", "o", "g", "s", "usemtl", "mtllib"):
            continue
        else:
            raise ObjParseError(f"line {lineno}: unsupported record {tag!r}")
    n = len(verts)
    for lineno, idx in face_lines:
        resolved = []
        for i in idx:
            j = i - 1 if i > 0 else n + i
            if i == 0 or not 0 <= j < n:
                raise ObjParseError(f"line {lineno}: vertex index {i} out of range (1..{n})")
            resolved.append(j)
        for k in range(1, len(resolved) - 1):
            tris.append([resolved[0], resolved[k], resolved[k + 1]])
    mesh = TriMesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))
    try:
        return mesh.validate()
    except MeshError as exc:
        raise ObjParseError(str(exc)) from None


def write_obj(mesh: TriMesh, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist())
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist())
    return "\n".join(lines) + "\n"


def read_obj(path) -> TriMesh:
    with open(path, encoding="utf-8") as fh:
        return parse_obj(fh.read())
