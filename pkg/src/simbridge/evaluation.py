"""Offline navigation and SLAM metrics, plus vector similarity helpers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EvalError

KL_EPS = 1e-10


# -- navigation --------------------------------------------------------------

@dataclass(frozen=True)
class Episode:
    success: int
    collisions: int

    def __post_init__(self):
        if self.success not in (0, 1):
            raise EvalError(f"success must be 0 or 1, got {self.success!r}")
        if isinstance(self.collisions, bool) or int(self.collisions) != self.collisions or self.collisions < 0:
            raise EvalError(f"collisions must be a non-negative integer, got {self.collisions!r}")


def sc(episodes) -> float:
    """Success weighted by collision: mean of S_i / (1 + c_i)."""
    eps = [e if isinstance(e, Episode) else Episode(*e) for e in episodes]
    if not eps:
        raise EvalError("sc needs at least one episode")
    return math.fsum(e.success / (1.0 + e.collisions) for e in eps) / len(eps)


def load_episodes(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EvalError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(doc, dict):
        doc = doc.get("episodes")
    if not isinstance(doc, list):
        raise EvalError(f"{path}: expected a list of episodes or {{\"episodes\": [...]}}")
    out = []
    for i, e in enumerate(doc):
        if not isinstance(e, dict) or "success" not in e or "collisions" not in e:
            raise EvalError(f"{path}: episodes[{i}] needs 'success' and 'collisions'")
        s = e["success"]
        s = int(s) if isinstance(s, bool) else s
        out.append(Episode(s, e["collisions"]))
    return out


# -- trajectories ------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.positions):
            raise EvalError("times and positions differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise EvalError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum()) if len(self) > 1 else 0.0


def load_trajectory(path) -> Trajectory:
    """Read a CSV with ``time_s,px,py,pz`` columns (the GlobalPose export works as is)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EvalError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    try:
        cols = [head.index(c) for c in ("time_s", "px", "py", "pz")]
    except ValueError:
        raise EvalError(f"{path}: header needs time_s,px,py,pz; got {','.join(head)}") from None
    data = []
    for ln, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        try:
            data.append([float(r[c]) for c in cols])
        except (ValueError, IndexError):
            raise EvalError(f"{path}:{ln}: bad row {r!r}") from None
    if not data:
        raise EvalError(f"{path}: no samples")
    a = np.array(data)
    return Trajectory(a[:, 0], a[:, 1:])


def associate(gt: Trajectory, est: Trajectory, max_dt=0.02):
    """Greedy nearest-timestamp pairing; returns two aligned (n,3) arrays."""
    if len(gt) == 0 or len(est) == 0:
        raise EvalError("association needs non-empty trajectories")
    cand = []
    for i, t in enumerate(gt.times):
        j = int(np.searchsorted(est.times, t))
        for k in (j - 1, j, j + 1):
            if 0 <= k < len(est):
                dt = abs(est.times[k] - t)
                if dt <= max_dt:
                    cand.append((dt, i, k))
    cand.sort()
    used_g, used_e, pairs = set(), set(), []
    for dt, i, k in cand:
        if i in used_g or k in used_e:
            continue
        used_g.add(i)
        used_e.add(k)
        pairs.append((i, k))
    if not pairs:
        raise EvalError(f"no sample pairs within max_dt={max_dt}")
    pairs.sort()
    gi = [i for i, _ in pairs]
    ei = [k for _, k in pairs]
    return gt.positions[gi], est.positions[ei]


def ate(gt_points, est_points) -> float:
    p = np.asarray(gt_points, dtype=float).reshape(-1, 3)
    q = np.asarray(est_points, dtype=float).reshape(-1, 3)
    if len(p) == 0 or len(p) != len(q):
        raise EvalError("ate needs equally many (>= 1) paired points")
    return float(np.sqrt(np.mean(np.sum((p - q) ** 2, axis=1))))


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    reflected: bool = False

    def apply(self, points):
        return self.scale * np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def umeyama(gt_points, est_points, rank_tol=1e-10) -> SimilarityTransform:
    """Least-squares (s, R, t) with gt ≈ s·R·est + t."""
    p = np.asarray(gt_points, dtype=float).reshape(-1, 3)
    q = np.asarray(est_points, dtype=float).reshape(-1, 3)
    n = len(p)
    if n != len(q):
        raise EvalError("umeyama needs equally many points")
    if n < 3:
        raise EvalError("umeyama needs at least 3 point pairs")
    mp, mq = p.mean(axis=0), q.mean(axis=0)
    pc, qc = p - mp, q - mq
    var_q = float(np.sum(qc**2)) / n
    cov = pc.T @ qc / n
    U, D, Vt = np.linalg.svd(cov)
    scale_ref = max(D[0], 1e-300)
    if var_q == 0 or D[1] <= rank_tol * scale_ref:
        raise EvalError("degenerate configuration: points are collinear or coincident (covariance rank < 2)")
    S = np.ones(3)
    reflected = np.linalg.det(U) * np.linalg.det(Vt) < 0
    if reflected:
        S[2] = -1.0
    R = (U * S) @ Vt
    s = float(np.dot(D, S)) / var_q
    t = mp - s * R @ mq
    return SimilarityTransform(s, R, t, bool(reflected))


def align(gt_points, est_points):
    """Return ``est`` mapped onto ``gt`` plus the transform used."""
    T = umeyama(gt_points, est_points)
    return T.apply(est_points), T


def path_length(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()) if len(pts) > 1 else 0.0


def coverage(gt_points, est_points) -> float:
    """Estimated path length over ground-truth path length (can exceed 1)."""
    gt = np.asarray(gt_points, dtype=float).reshape(-1, 3)
    est = np.asarray(est_points, dtype=float).reshape(-1, 3)
    if len(gt) < 2 or len(est) < 2:
        raise EvalError("coverage needs at least 2 samples in each trajectory")
    L = path_length(gt)
    if L == 0:
        raise EvalError("ground-truth trajectory has zero length")
    return path_length(est) / L


def scaled_ate(ate_m, cov) -> float:
    if not cov > 0:
        raise EvalError(f"coverage must be > 0, got {cov}")
    return ate_m / cov


@dataclass(frozen=True)
class AteReport:
    ate: float
    coverage: float
    scaled_ate: float
    pairs: int
    scale: float | None = None


def evaluate_trajectory(gt: Trajectory, est: Trajectory, do_align=True, max_dt=0.02) -> AteReport:
    p, q = associate(gt, est, max_dt)
    s = None
    if do_align:
        q, T = align(p, q)
        s = T.scale
    e = ate(p, q)
    c = coverage(p, q)
    return AteReport(e, c, scaled_ate(e, c), len(p), s)


# -- vectors -----------------------------------------------------------------

def cosine(P, Q) -> float:
    a = np.asarray(P, dtype=float).reshape(-1)
    b = np.asarray(Q, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise EvalError(f"length mismatch: {a.size} vs {b.size}")
    ma, mb = np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0)
    if ma == 0 or mb == 0:
        raise EvalError("cosine of a zero vector is undefined")
    a, b = a / ma, b / mb  # keeps tiny or huge inputs from under/overflowing in the norms
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def normalize(P, eps=KL_EPS) -> np.ndarray:
    """Scale to unit sum, floor zeros at ``eps`` and rescale."""
    a = np.asarray(P, dtype=float).reshape(-1)
    if a.size == 0 or np.any(a < 0) or not np.all(np.isfinite(a)):
        raise EvalError("probability vector must be non-empty, finite and non-negative")
    tot = a.sum()
    if tot == 0:
        raise EvalError("probability vector sums to zero")
    a = np.maximum(a / tot, eps)
    return a / a.sum()


def kl(P, Q, base=math.e, eps=KL_EPS) -> float:
    """KL(P‖Q); natural log unless ``base`` is given."""
    p = np.asarray(P, dtype=float).reshape(-1)
    q = np.asarray(Q, dtype=float).reshape(-1)
    if p.shape != q.shape:
        raise EvalError(f"length mismatch: {p.size} vs {q.size}")
    p, q = normalize(p, eps), normalize(q, eps)
    val = float(np.sum(p * np.log(p / q)))
    return max(val, 0.0) / math.log(base)


def image_histogram(image, bins=256) -> np.ndarray:
    """256-bin luminance histogram (Rec. 601 weights) of an 8-bit gray or RGB array."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114
    h, _ = np.histogram(np.clip(img, 0, 255), bins=bins, range=(0, 256))
    return h.astype(float)


def load_hist(path) -> np.ndarray:
    """Numbers separated by whitespace or commas; ``#`` starts a comment."""
    vals = []
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].replace(",", " ")
        for tok in line.split():
            try:
                vals.append(float(tok))
            except ValueError:
                raise EvalError(f"{path}:{ln}: not a number: {tok!r}") from None
    if not vals:
        raise EvalError(f"{path}: empty histogram")
    return np.array(vals)
