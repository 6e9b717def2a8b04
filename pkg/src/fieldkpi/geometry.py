"""Spatial primitives shared by the KPI engines.

Point clouds are plain ``(n, 3)`` float arrays in meters; trajectories carry
their timestamps alongside the positions. Nearest-neighbor searches are
exhaustive for small inputs and run on a k-d tree above ``BRUTE_FORCE_MAX``
points; in both cases every reported distance is recomputed from the selected pair so
results are bit-identical to a direct evaluation of the same pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

DEFAULT_CELL_SIZE = 0.25
DEFAULT_MAX_DT = 0.1
# below this size nearest-neighbour queries are answered by exhaustive search
BRUTE_FORCE_MAX = 512
ALIGN_MODES = ("none", "translation", "rigid")


class GeometryError(ValueError):
    """Raised when a geometric computation has no meaningful answer."""


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce ``points`` to a finite float array of shape ``(n, d)``."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, dim or 3)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or (dim is not None and arr.shape[1] != dim):
        raise GeometryError(f"expected an (n, {dim or 'd'}) point array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point coordinates must be finite")
    return arr


def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a - b
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped 3D positions; ``t`` strictly increasing."""

    t: np.ndarray
    xyz: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        xyz = as_points(self.xyz, 3) if len(t) else np.zeros((0, 3))
        if len(t) != len(xyz):
            raise GeometryError("trajectory needs one timestamp per position")
        if not np.all(np.isfinite(t)):
            raise GeometryError("trajectory timestamps must be finite")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise GeometryError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xyz", xyz)

    @classmethod
    def from_samples(cls, samples) -> "Trajectory":
        arr = np.asarray(list(samples), dtype=float).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1:])

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.t, other.t) and np.array_equal(self.xyz, other.xyz)


@dataclass(frozen=True)
class CoverageResult:
    area: float
    cell_size: float
    occupied_cell_count: int


def mapped_area(cloud, cell_size: float = DEFAULT_CELL_SIZE) -> CoverageResult:
    """Horizontal area covered by ``cloud`` on an origin-anchored occupancy grid.

    A point owns cell ``floor(x / cell_size), floor(y / cell_size)``; the area is
    the number of distinct occupied cells times the cell area.
    """
    if not cell_size > 0:
        raise GeometryError("cell_size must be positive")
    pts = as_points(cloud)
    if len(pts) == 0:
        return CoverageResult(0.0, float(cell_size), 0)
    cells = np.floor(pts[:, :2] / cell_size).astype(np.int64)
    n = len(np.unique(cells, axis=0))
    return CoverageResult(n * cell_size * cell_size, float(cell_size), int(n))


def traveled_distance(traj) -> float:
    """Sum of straight-line distances between consecutive samples."""
    xyz = traj.xyz if isinstance(traj, Trajectory) else as_points(traj)
    if len(xyz) < 2:
        return 0.0
    return float(np.sum(_pair_distances(xyz[1:], xyz[:-1])))


def _brute_nearest(q: np.ndarray, ref: np.ndarray, exclude_self: bool = False) -> np.ndarray:
    """Index of the closest ``ref`` row for every ``q`` row (first index on ties)."""
    d = np.stack([_pair_distances(q, np.broadcast_to(r, q.shape)) for r in ref], axis=1)
    if exclude_self:
        np.fill_diagonal(d, np.inf)
    return np.argmin(d, axis=1)


def nn_distances(points) -> np.ndarray:
    """Distance from every point to its nearest other point.

    Coincident points are allowed and give a distance of 0.
    """
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        raise GeometryError("insufficient points: nearest-neighbor distances need n >= 2")
    if n <= BRUTE_FORCE_MAX:
        other = _brute_nearest(pts, pts, exclude_self=True)
    else:
        _, idx = cKDTree(pts).query(pts, k=2)
        own = np.arange(n)
        # with duplicates the tree may list the twin before self
        other = np.where(idx[:, 0] == own, idx[:, 1], idx[:, 0])
    return _pair_distances(pts, pts[other])


def nearest_distances(query, reference) -> np.ndarray:
    """For each query point, the distance to the closest reference point."""
    q = as_points(query)
    ref = as_points(reference, q.shape[1])
    if len(ref) <= BRUTE_FORCE_MAX and len(q) <= BRUTE_FORCE_MAX:
        idx = _brute_nearest(q, ref)
    else:
        _, idx = cKDTree(ref).query(q, k=1)
    return _pair_distances(q, ref[idx])


def chamfer_distance(m, gt) -> float:
    """Bidirectional Chamfer distance in meters (unsquared, mean per direction)."""
    m = as_points(m)
    gt = as_points(gt, m.shape[1])
    if len(m) == 0 or len(gt) == 0:
        raise GeometryError("chamfer distance needs two non-empty clouds")
    forward = nearest_distances(m, gt).mean()
    backward = nearest_distances(gt, m).mean()
    return float(0.5 * (forward + backward))


def hull_area(points) -> float:
    """Area of the 2D convex hull of the horizontal projection."""
    pts = as_points(points)[:, :2]
    if len(pts) < 3:
        raise GeometryError("convex hull needs at least 3 points")
    try:
        return float(ConvexHull(pts).volume)
    except QhullError as exc:
        raise GeometryError("convex hull is degenerate (collinear points)") from exc


@dataclass(frozen=True, eq=False)
class Association:
    est_t: np.ndarray
    est: np.ndarray
    gt: np.ndarray
    matched: int
    dropped: int


def associate_poses(est: Trajectory, gt: Trajectory, max_dt: float = DEFAULT_MAX_DT) -> Association:
    """Pair each estimated sample with the ground-truth sample nearest in time.

    Pairs further apart than ``max_dt`` seconds are dropped. Equidistant
    candidates resolve to the earlier ground-truth sample.
    """
    if not max_dt > 0:
        raise GeometryError("max_dt must be positive")
    if len(est) == 0 or len(gt) == 0:
        raise GeometryError("disjoint time ranges: a trajectory is empty")
    right = np.clip(np.searchsorted(gt.t, est.t), 0, len(gt) - 1)
    left = np.clip(right - 1, 0, len(gt) - 1)
    pick_left = np.abs(est.t - gt.t[left]) <= np.abs(gt.t[right] - est.t)
    j = np.where(pick_left, left, right)
    ok = np.abs(gt.t[j] - est.t) <= max_dt
    matched = int(ok.sum())
    if matched == 0:
        raise GeometryError("disjoint time ranges: no estimated pose within max_dt of ground truth")
    return Association(est.t[ok], est.xyz[ok], gt.xyz[j[ok]], matched, len(est) - matched)


@dataclass(frozen=True, eq=False)
class Alignment:
    aligned: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    mode: str

    def residuals(self, target) -> np.ndarray:
        return _pair_distances(self.aligned, as_points(target))


def rigid_align(est, gt, mode: str = "rigid") -> Alignment:
    """Align estimated positions onto ground truth.

    ``translation`` removes the centroid offset; ``rigid`` solves the
    least-squares rotation and translation in closed form (Umeyama, no scale).
    """
    est = as_points(est, 3)
    gt = as_points(gt, 3)
    if est.shape != gt.shape:
        raise GeometryError("alignment needs matched position pairs")
    if mode not in ALIGN_MODES:
        raise GeometryError(f"unknown alignment mode {mode!r}; expected one of {ALIGN_MODES}")
    rot = np.eye(3)
    if mode == "none":
        return Alignment(est.copy(), rot, np.zeros(3), mode)
    if len(est) < 1:
        raise GeometryError("alignment needs at least one pair")
    mu_est = est.mean(axis=0)
    mu_gt = gt.mean(axis=0)
    if mode == "rigid":
        if len(est) < 3:
            raise GeometryError("degenerate geometry: rigid alignment needs >= 3 pairs; use mode='translation'")
        est_c = est - mu_est
        spread = np.linalg.svd(est_c, compute_uv=False)
        if spread[0] == 0 or spread[1] <= 1e-9 * spread[0]:
            raise GeometryError("degenerate geometry: positions are collinear; use mode='translation'")
        cov = (gt - mu_gt).T @ est_c / len(est)
        u, _, vt = np.linalg.svd(cov)
        d = np.eye(3)
        if np.linalg.det(u) * np.linalg.det(vt) < 0:
            d[2, 2] = -1.0
        rot = u @ d @ vt
    trans = mu_gt - rot @ mu_est
    return Alignment(est @ rot.T + trans, rot, trans, mode)


def rmse(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise GeometryError("rmse of an empty set")
    return float(np.sqrt(np.mean(v * v)))
