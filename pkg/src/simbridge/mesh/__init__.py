from .cache import DecompositionCache, cache_key, mesh_hash
from .decompose import DecompositionWarning, decompose, decompose_with_info
from .hull import ConvexPart, convex_hull
from .obj import TriMesh, parse_obj, read_obj, write_obj
from .volume import concavity, mesh_volume

__all__ = [
    "ConvexPart",
    "DecompositionCache",
    "DecompositionWarning",
    "TriMesh",
    "cache_key",
    "concavity",
    "convex_hull",
    "decompose",
    "decompose_with_info",
    "mesh_hash",
    "mesh_volume",
    "parse_obj",
    "read_obj",
    "write_obj",
]
