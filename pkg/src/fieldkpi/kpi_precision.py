"""Precision KPIs: science sampling, localization, placement, sensing, map and detection accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .errors import NotApplicable
from .geometry import (
    DEFAULT_MAX_DT,
    Alignment,
    CoverageResult,
    GeometryError,
    Trajectory,
    as_points,
    associate_poses,
    chamfer_distance,
    nn_distances,
    rigid_align,
    rmse,
)
from .telemetry import Event

DEFAULT_MATCH_RADIUS = 1.0
AREA_SOURCES = ("mapped_area", "convex_hull")


def science_acquisition_density(measurements: Iterable[Event], area) -> float:
    """Valid measurements per square meter of mapped area."""
    a = area.area if isinstance(area, CoverageResult) else float(area)
    if a <= 0:
        raise NotApplicable("mapped area is zero")
    return sum(1 for m in measurements if m["valid"]) / a


@dataclass(frozen=True)
class ClarkEvansResult:
    r: float
    n: int
    intensity: float
    d_obs: float
    d_exp: float
    area: float
    area_source: str


def clark_evans(points, area: float, area_source: str = "mapped_area") -> ClarkEvansResult:
    """Clark-Evans aggregation index of a planar point pattern.

    Observed mean nearest-neighbor distance over the value expected under
    complete spatial randomness, ``1 / (2 sqrt(n / area))``. Points are
    projected onto the horizontal plane; no edge correction is applied.
    """
    pts = as_points(points)
    if len(pts) < 2:
        raise NotApplicable("Clark-Evans ratio needs at least 2 points")
    if not area > 0:
        raise NotApplicable("study area is zero")
    d_obs = float(np.mean(nn_distances(pts[:, :2])))
    intensity = len(pts) / area
    d_exp = 1.0 / (2.0 * math.sqrt(intensity))
    return ClarkEvansResult(d_obs / d_exp, len(pts), intensity, d_obs, d_exp, float(area), area_source)


@dataclass(frozen=True, eq=False)
class AteResult:
    rmse: float
    matched: int
    dropped: int
    mode: str
    alignment: Alignment
    residuals: np.ndarray = field(repr=False)


def localization_error(est: Trajectory, gt: Trajectory, align: str = "rigid",
                       max_dt: float = DEFAULT_MAX_DT) -> AteResult:
    """Position ATE RMSE after time association and optional alignment."""
    try:
        pairs = associate_poses(est, gt, max_dt)
    except GeometryError as exc:
        raise NotApplicable(str(exc)) from exc
    al = rigid_align(pairs.est, pairs.gt, align)
    res = al.residuals(pairs.gt)
    return AteResult(rmse(res), pairs.matched, pairs.dropped, al.mode, al, res)


@dataclass(frozen=True)
class PlacementError:
    median: float
    rmse: float
    n: int


def instrument_placement_error(placements: Iterable[Event]) -> PlacementError:
    """Commanded-versus-achieved distance; both median and RMSE are reported."""
    pairs = [(ev["commanded"], ev["achieved"]) for ev in placements]
    if not pairs:
        raise NotApplicable("no instrument placements")
    cmd = np.array([p[0] for p in pairs], dtype=float)
    ach = np.array([p[1] for p in pairs], dtype=float)
    d = np.linalg.norm(ach - cmd, axis=1)
    return PlacementError(float(np.median(d)), rmse(d), len(d))


@dataclass(frozen=True)
class RemoteSensingResult:
    rmse: float
    n_matched: int
    unmatched_remote: int
    unmatched_gt: int

    @property
    def unmatched(self) -> int:
        return self.unmatched_remote + self.unmatched_gt


def remote_sensing_error(remote_targets: Iterable[Event], gt_targets: Mapping[str, tuple]) -> RemoteSensingResult:
    """RMSE between sensed and true target positions, paired by ``target_id``.

    Every sensing event is one observation. Ids seen on only one side are
    counted but excluded from the RMSE.
    """
    remote = list(remote_targets)
    seen = {ev["target_id"] for ev in remote}
    d = [math.dist(ev.xyz, gt_targets[ev["target_id"]]) for ev in remote if ev["target_id"] in gt_targets]
    unmatched_remote = len(seen - set(gt_targets))
    unmatched_gt = len(set(gt_targets) - seen)
    if not d:
        raise NotApplicable("no sensed target id matches the ground truth")
    return RemoteSensingResult(rmse(d), len(d), unmatched_remote, unmatched_gt)


def map_error(m, gt) -> float:
    """Bidirectional Chamfer distance between the built map and ground truth."""
    try:
        return chamfer_distance(m, gt)
    except GeometryError as exc:
        raise NotApplicable(str(exc)) from exc


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (detection index, gt index, distance)
    unmatched_detections: tuple[int, ...]
    unmatched_gt: tuple[int, ...]
    match_radius: float
    n_gt: int

    @property
    def n_matched(self) -> int:
        return len(self.pairs)


def greedy_match(detections, ground_truth, match_radius: float = DEFAULT_MATCH_RADIUS) -> MatchResult:
    """Greedy nearest-pair matching within ``match_radius``.

    Candidate pairs are accepted in order of increasing distance (ties broken
    by detection index, then ground-truth index) whenever both ends are free.
    """
    det = as_points(detections)
    gt = as_points(ground_truth, det.shape[1] if len(det) else None)
    cand = []
    if len(det) and len(gt):
        # widen the index query slightly; the exact test below decides membership
        reach = match_radius * (1.0 + 1e-9)
        for i, js in enumerate(cKDTree(gt).query_ball_point(det, reach)):
            for j in js:
                d = math.dist(det[i], gt[j])
                if d <= match_radius:
                    cand.append((d, i, j))
    cand.sort()
    used_d, used_g = set(), set()
    pairs = []
    for d, i, j in cand:
        if i not in used_d and j not in used_g:
            used_d.add(i)
            used_g.add(j)
            pairs.append((i, j, d))
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_detections=tuple(i for i in range(len(det)) if i not in used_d),
        unmatched_gt=tuple(j for j in range(len(gt)) if j not in used_g),
        match_radius=float(match_radius),
        n_gt=len(gt),
    )


def identified_resources_ratio(detections, ground_truth,
                               match_radius: float = DEFAULT_MATCH_RADIUS) -> tuple[float, MatchResult]:
    """Percent of ground-truth resources matched by a detection."""
    match = greedy_match(detections, ground_truth, match_radius)
    if match.n_gt == 0:
        raise NotApplicable("no ground-truth resources")
    return match.n_matched / match.n_gt * 100.0, match
