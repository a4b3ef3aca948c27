from __future__ import annotations

from collections import Counter

import numpy as np

from ..errors import MeshError, NonWatertightError
from .hull import convex_hull
from .obj import TriMesh


def boundary_edges(mesh: TriMesh):
    """Undirected edges not shared by exactly two triangles."""
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    counts = Counter(map(tuple, e.tolist()))
    return [edge for edge, c in counts.items() if c != 2]


def signed_volume(mesh: TriMesh, origin=None) -> float:
    v = mesh.vertices[mesh.triangles]
    if origin is not None:
        v = v - np.asarray(origin)
    return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


def mesh_volume(mesh: TriMesh) -> float:
    """Divergence-theorem volume of a closed, consistently oriented mesh."""
    if not len(mesh.triangles):
        raise MeshError("mesh has no triangles")
    bad = boundary_edges(mesh)
    if bad:
        raise NonWatertightError(bad)
    return signed_volume(mesh, origin=mesh.vertices.mean(axis=0))


def concavity_from(volume: float, hull_volume: float) -> float:
    if hull_volume <= 0:
        return 0.0
    return min(1.0, max(0.0, (hull_volume - volume) / hull_volume))


def concavity(mesh: TriMesh) -> float:
    """Fraction of the convex hull's volume not occupied by the mesh."""
    vol = mesh_volume(mesh)
    return concavity_from(vol, convex_hull(mesh.vertices).volume())
