"""Content-addressed on-disk cache of decomposition results.

Layout: ``<root>/<key hex>/part_000.obj ...`` plus ``meta.json``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from ..errors import SimbridgeError
from .decompose import decompose_with_info
from .hull import ConvexPart
from .obj import TriMesh, parse_obj, write_obj

log = logging.getLogger(__name__)

_KEY_VERSION = b"simbridge-acd-v1\0"


def mesh_hash(mesh: TriMesh) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(mesh.triangles, dtype="<i8").tobytes())
    return h.hexdigest()


def cache_key(mesh: TriMesh, threshold: float, max_depth: int) -> str:
    h = hashlib.sha256(_KEY_VERSION)
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(b"\0tri\0")
    h.update(np.ascontiguousarray(mesh.triangles, dtype="<i8").tobytes())
    h.update(b"\0params\0")
    h.update(json.dumps({"threshold": repr(float(threshold)), "max_depth": int(max_depth)}, sort_keys=True).encode())
    return h.hexdigest()


class DecompositionCache:
    def __init__(self, root):
        self.root = Path(root)
        self.recompute_count = 0
        self.hit_count = 0

    def _dir(self, key: str) -> Path:
        return self.root / key

    def get(self, key: str):
        d = self._dir(key)
        meta_path = d / "meta.json"
        if not meta_path.is_file():
            return None
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            parts = []
            for i in range(int(meta["part_count"])):
                m = parse_obj((d / f"part_{i:03d}.obj").read_text(encoding="utf-8"))
                parts.append(ConvexPart(m.vertices, m.triangles))
            if not parts:
                raise ValueError("no parts")
        except (OSError, ValueError, KeyError, TypeError, SimbridgeError) as exc:
            log.warning("ignoring corrupt cache entry %s: %s", key, exc)
            return None
        return parts

    def put(self, key: str, parts, meta=None) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{key[:12]}-", dir=self.root))
        try:
            for i, part in enumerate(parts):
                (tmp / f"part_{i:03d}.obj").write_text(write_obj(part), encoding="utf-8")
            info = dict(meta or {})
            info["part_count"] = len(parts)
            (tmp / "meta.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            final = self._dir(key)
            if final.exists():
                shutil.rmtree(final)
            os.replace(tmp, final)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise

    def decompose(self, mesh: TriMesh, threshold: float = 0.05, max_depth: int = 6, workers: int = 1):
        """Cached :func:`decompose`; ``recompute_count`` counts actual decompositions."""
        key = cache_key(mesh, threshold, max_depth)
        parts = self.get(key)
        if parts is not None:
            self.hit_count += 1
            return parts
        self.recompute_count += 1
        res = decompose_with_info(mesh, threshold, max_depth, workers)
        meta = {
            "threshold": threshold,
            "max_depth": max_depth,
            "source_hash": mesh_hash(mesh),
            "converged": res.converged,
        }
        self.put(key, res.parts, meta)
        # reload so callers always see exactly what a warm cache returns
        return self.get(key) or res.parts
