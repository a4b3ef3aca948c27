"""Independent checks shared by several test files (kept free of simbridge internals)."""
import numpy as np


def face_planes(vertices, triangles):
    v = np.asarray(vertices, float)[np.asarray(triangles)]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    d = np.einsum("ij,ij->i", n, v[:, 0])
    return n, d


def is_convex_part(vertices, triangles, tol=1e-6):
    """Every vertex lies behind every face plane and on the boundary of its own hull."""
    n, d = face_planes(vertices, triangles)
    s = np.asarray(vertices, float) @ n.T - d
    if s.max() > tol:
        return False
    return bool(np.all(np.min(np.abs(s), axis=1) <= tol))


def voxel_grid(lo, hi, res=64):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    step = (hi - lo) / res
    # a small irrational shift keeps sample columns off mesh edges
    jitter = (1.3e-7 * np.sqrt(2), 1.7e-7 * np.sqrt(3), 0.0)
    axes = [lo[k] + step[k] * (np.arange(res) + 0.5) + jitter[k] for k in range(3)]
    return axes, float(np.prod(step))


def inside_mesh(mesh_vertices, mesh_triangles, axes):
    """Parity of +z ray crossings per (x, y) column; returns a boolean (nx, ny, nz) grid."""
    xs, ys, zs = axes
    tri = np.asarray(mesh_vertices, float)[np.asarray(mesh_triangles)]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    px, py = X.ravel(), Y.ravel()
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    # 2-D barycentrics of each column in each triangle's xy projection
    det = (b[:, 1] - c[:, 1]) * (a[:, 0] - c[:, 0]) + (c[:, 0] - b[:, 0]) * (a[:, 1] - c[:, 1])
    ok = np.abs(det) > 1e-15
    a, b, c, det = a[ok], b[ok], c[ok], det[ok]
    dx = px[:, None] - c[None, :, 0]
    dy = py[:, None] - c[None, :, 1]
    l1 = ((b[:, 1] - c[:, 1])[None] * dx + (c[:, 0] - b[:, 0])[None] * dy) / det[None]
    l2 = ((c[:, 1] - a[:, 1])[None] * dx + (a[:, 0] - c[:, 0])[None] * dy) / det[None]
    l3 = 1 - l1 - l2
    hit = (l1 >= 0) & (l2 >= 0) & (l3 >= 0)
    zhit = l1 * a[None, :, 2] + l2 * b[None, :, 2] + l3 * c[None, :, 2]
    zhit = np.where(hit, zhit, np.inf)
    crossings = np.stack([(zhit > z).sum(axis=1) for z in zs], axis=1)
    return (crossings % 2 == 1).reshape(len(xs), len(ys), len(zs))


def inside_convex(vertices, triangles, axes, tol=1e-12):
    n, d = face_planes(vertices, triangles)
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    return np.all(pts @ n.T - d <= tol, axis=1).reshape(X.shape)


def rotation_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
