"""Deterministic multi-robot mission generator with known KPI ground truth.

Phase 1: scouts sweep equal horizontal bands of the survey area in a
boustrophedon pattern and map every grid cell of their band. Phase 2:
scientists visit lattice sites at ``sampling_interval`` spacing in serpentine
order and run one measurement task per site. Operator interactions, manual
override windows, downtime, task failures, pose noise, detection dropouts and
placement/sensing offsets are injected from the configuration.

The expected report is derived from the configuration by direct arithmetic on
the scheduled windows (elementary-segment sums, brute-force nearest neighbors),
never through the analysis code it is meant to check.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from statistics import median
from typing import Any

import numpy as np

from .geometry import Trajectory
from .report import KpiReport, KpiValue, assemble_report, not_applicable
from .rng import XorShift64Star
from .telemetry import (
    Event,
    GroundTruthResource,
    Manifest,
    MissionLog,
    RobotInfo,
    write_cloud,
    write_events,
    write_gt_resources,
    write_gt_targets,
    write_trajectory,
)

EXACT_REL = 1e-9
GEOM_ABS = 1e-6


class InfeasibleConfig(ValueError):
    """The configuration cannot be simulated; the message names the binding constraint."""


@dataclass(frozen=True)
class RobotSpec:
    id: str
    role: str
    speed: float = 0.5
    swath_width: float = 10.0


@dataclass(frozen=True)
class Interaction:
    channel: str | None
    start: float
    duration: float
    kind: str = "command"


@dataclass(frozen=True)
class TaskFailure:
    task_id: str
    failed_attempts: int = 1
    completes: bool = True


@dataclass(frozen=True)
class Window:
    robot: str
    start: float
    duration: float
    state: str = "manual"

    @property
    def end(self) -> float:
        return self.start + self.duration


_NESTED = {
    "robots": RobotSpec,
    "interactions": Interaction,
    "task_failures": TaskFailure,
    "unscheduled_manual": Window,
    "scheduled_manual": Window,
    "downtime": Window,
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "custom"
    seed: int = 0
    robots: tuple[RobotSpec, ...] = ()
    area_origin: tuple[float, float] = (0.0, 0.0)
    area_size: tuple[float, float] = (100.0, 100.0)
    sampling_interval: float = 50.0
    setup_duration: float = 300.0
    phase1_duration: float = 3000.0
    phase2_duration: float = 4000.0
    pose_period: float = 5.0
    measurement_duration: float = 180.0
    map_resolution: float = 0.25
    terrain_slope_deg: float = 0.0
    interactions: tuple[Interaction, ...] = ()
    task_failures: tuple[TaskFailure, ...] = ()
    unscheduled_manual: tuple[Window, ...] = ()
    scheduled_manual: tuple[Window, ...] = ()
    downtime: tuple[Window, ...] = ()
    pose_noise_sigma: float = 0.0
    n_resources: int = 0
    detection_dropout: tuple[str, ...] = ()
    detection_offset: float = 0.2
    false_detections: int = 0
    placement_offsets: tuple[float, ...] = ()
    remote_target_offsets: tuple[float, ...] = ()
    map_offset_z: float = 0.0
    tlx_score: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def t_mission(self) -> float:
        return self.setup_duration + self.phase1_duration + self.phase2_duration

    @property
    def phase1(self) -> tuple[float, float]:
        return self.setup_duration, self.setup_duration + self.phase1_duration

    @property
    def phase2(self) -> tuple[float, float]:
        return self.phase1[1], self.t_mission

    def role(self, role: str) -> list[RobotSpec]:
        return [r for r in self.robots if r.role == role]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        kwargs = {}
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InfeasibleConfig(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k, v in d.items():
            if k in _NESTED:
                kwargs[k] = tuple(_NESTED[k](**item) for item in v)
            elif k in ("area_origin", "area_size"):
                kwargs[k] = (float(v[0]), float(v[1]))
            elif k in ("detection_dropout",):
                kwargs[k] = tuple(str(x) for x in v)
            elif k in ("placement_offsets", "remote_target_offsets"):
                kwargs[k] = tuple(float(x) for x in v)
            else:
                kwargs[k] = v
        return cls(**kwargs)


# -- presets ---------------------------------------------------------------

def preset(name: str, seed: int = 42) -> ScenarioConfig:
    """Scenario presets; site coordinates and terrain figures are descriptive metadata only."""
    if name == "s1":
        return ScenarioConfig(
            scenario="s1", seed=seed,
            robots=(RobotSpec("scout_a", "scout", 0.5, 10.0), RobotSpec("scout_b", "scout", 0.5, 10.0),
                    RobotSpec("sci_a", "scientist", 0.3), RobotSpec("sci_b", "scientist", 0.3)),
            area_size=(200.0, 200.0), sampling_interval=50.0,
            setup_duration=300.0, phase1_duration=5000.0, phase2_duration=7000.0,
            pose_period=5.0, measurement_duration=180.0, terrain_slope_deg=0.63,
            interactions=(Interaction("scout_a", 1000.0, 120.0, "waypoint"),
                          Interaction(None, 1050.0, 300.0, "replan"),
                          Interaction("scout_b", 2500.0, 60.0, "teleop"),
                          Interaction("sci_a", 6000.0, 90.0, "target_selection"),
                          Interaction("sci_b", 9000.0, 45.0, "target_selection")),
            task_failures=(TaskFailure("site_007", 1),),
            unscheduled_manual=(Window("scout_b", 2500.0, 60.0),),
            downtime=(Window("sci_b", 8000.0, 200.0, "fault"),),
            pose_noise_sigma=0.02, n_resources=8, detection_dropout=("R003",),
            placement_offsets=(0.01, 0.02, 0.04), remote_target_offsets=(0.5, 1.0, 0.25),
            tlx_score=35.0,
            metadata={"resource": "ilmenite", "landing_zone": "5.48N 350.91E", "mean_slope_deg": 0.63,
                      "rock_abundance": 0.004, "sampling_interval_m": 50},
        )
    if name == "s2":
        return ScenarioConfig(
            scenario="s2", seed=seed,
            robots=(RobotSpec("scout_a", "scout", 0.5, 15.0), RobotSpec("sci_a", "scientist", 0.3)),
            area_size=(400.0, 60.0), sampling_interval=50.0,
            setup_duration=300.0, phase1_duration=4500.0, phase2_duration=7000.0,
            pose_period=5.0, measurement_duration=180.0, terrain_slope_deg=1.09,
            interactions=(Interaction("scout_a", 1500.0, 30.0, "waypoint"),
                          Interaction("sci_a", 7000.0, 120.0, "teleop")),
            task_failures=(TaskFailure("site_004", 2), TaskFailure("site_012", 1)),
            unscheduled_manual=(Window("sci_a", 7000.0, 120.0),),
            downtime=(Window("scout_a", 2000.0, 400.0, "idle"), Window("scout_a", 3000.0, 150.0, "fault")),
            pose_noise_sigma=0.05, n_resources=6, detection_dropout=("R002", "R005"), false_detections=2,
            placement_offsets=(0.03,), remote_target_offsets=(0.8, 0.6),
            map_offset_z=0.05, tlx_score=48.0,
            metadata={"resource": "KREEP", "landing_zone": "23.52N 311.21E", "mean_slope_deg": 1.09,
                      "rock_abundance": 0.007, "traverse_length_km": 11},
        )
    if name == "s3":
        return ScenarioConfig(
            scenario="s3", seed=seed,
            robots=(RobotSpec("scout_a", "scout", 0.5, 10.0), RobotSpec("sci_a", "scientist", 0.25)),
            area_size=(100.0, 100.0), sampling_interval=50.0,
            setup_duration=300.0, phase1_duration=3000.0, phase2_duration=5000.0,
            pose_period=2.0, measurement_duration=180.0, terrain_slope_deg=1.24,
            interactions=(Interaction("scout_a", 600.0, 40.0, "teleop"),
                          Interaction("scout_a", 1400.0, 80.0, "teleop"),
                          Interaction(None, 1450.0, 200.0, "comm_recovery"),
                          Interaction("sci_a", 4000.0, 150.0, "teleop"),
                          Interaction("sci_a", 5200.0, 60.0, "waypoint")),
            task_failures=(TaskFailure("site_001", 2), TaskFailure("site_004", 1),
                           TaskFailure("site_008", 1, completes=False)),
            unscheduled_manual=(Window("scout_a", 1400.0, 80.0), Window("sci_a", 4000.0, 150.0)),
            scheduled_manual=(Window("sci_a", 5500.0, 100.0),),
            pose_noise_sigma=0.03, n_resources=5, detection_dropout=("R004",),
            placement_offsets=(0.02, 0.05), remote_target_offsets=(1.2,),
            tlx_score=62.0,
            metadata={"resource": "water ice", "landing_zone": "85.47S 29.72E", "mean_slope_deg": 1.24,
                      "rock_abundance": None},
        )
    raise KeyError(f"unknown preset {name!r}; expected s1, s2 or s3")


PRESETS = ("s1", "s2", "s3")
_INSTRUMENT = {"s1": "APXS", "s2": "LIBS", "s3": "LIBS"}
_RESOURCE = {"s1": "ilmenite", "s2": "kreep", "s3": "water_ice"}


# -- schedule helpers --------------------------------------------------------

class _Plan:
    """A robot's motion/dwell plan in productive time, mapped onto wall time around pauses."""

    def __init__(self, start_wall: float, start_pos, pauses):
        self.start_wall = start_wall
        self.pos = np.asarray(start_pos, dtype=float)
        self.pauses = sorted((w.start, w.end) for w in pauses)
        self.actions: list[tuple[float, float, np.ndarray, np.ndarray]] = []
        self.tau = 0.0

    def move(self, target, speed: float) -> float:
        target = np.asarray(target, dtype=float)
        dur = float(np.linalg.norm(target - self.pos)) / speed
        if dur > 0:
            self.actions.append((self.tau, self.tau + dur, self.pos, target))
        self.tau += dur
        self.pos = target
        return self.tau

    def dwell(self, duration: float) -> float:
        self.tau += duration
        return self.tau

    def wall(self, tau: float) -> float:
        cur, remaining = self.start_wall, tau
        for s, e in self.pauses:
            if e <= cur:
                continue
            ps = max(s, cur)
            if ps - cur >= remaining:
                break
            remaining -= ps - cur
            cur = e
        return cur + remaining

    @property
    def end_wall(self) -> float:
        return self.wall(self.tau)

    def tau_at(self, t: float) -> float:
        if t <= self.start_wall:
            return 0.0
        paused = sum(max(0.0, min(e, t) - max(s, self.start_wall)) for s, e in self.pauses)
        return min(self.tau, max(0.0, t - self.start_wall - paused))

    def position(self, t: float) -> np.ndarray:
        tau = self.tau_at(t)
        for a, b, p0, p1 in self.actions:
            if a <= tau <= b:
                return p0 + (p1 - p0) * ((tau - a) / (b - a))
        # before the first move or after the last one, the robot stands still
        before = [act for act in self.actions if act[1] <= tau]
        if before:
            return before[-1][3]
        return self.actions[0][2] if self.actions else self.pos

    def vertex_times(self) -> list[float]:
        out = []
        for a, b, _, _ in self.actions:
            out += [self.wall(a), self.wall(b)]
        return out


def _segments(boundaries, label_fn):
    """Split [min, max] of ``boundaries`` at every boundary and label each piece."""
    pts = sorted(set(boundaries))
    out = []
    for a, b in zip(pts, pts[1:]):
        if b > a:
            out.append((a, b, label_fn(0.5 * (a + b))))
    return out


def _runs(segments):
    """Merge consecutive equally-labelled segments."""
    runs = []
    for a, b, lab in segments:
        if runs and runs[-1][2] == lab and runs[-1][1] == a:
            runs[-1] = (runs[-1][0], b, lab)
        else:
            runs.append((a, b, lab))
    return runs


def _union_length(windows) -> float:
    total, cur_s, cur_e = 0.0, None, None
    for s, e in sorted(windows):
        if cur_e is None or s > cur_e:
            if cur_e is not None:
                total += cur_e - cur_s
            cur_s, cur_e = s, e
        else:
            cur_e = max(cur_e, e)
    if cur_e is not None:
        total += cur_e - cur_s
    return total


def _r9(v: float) -> float:
    return round(float(v), 9)


def _is_multiple(v: float, step: float) -> bool:
    q = v / step
    return abs(q - round(q)) < 1e-9


# -- generation ------------------------------------------------------------

@dataclass
class SimulationBundle:
    config: ScenarioConfig
    log: MissionLog
    map_cloud: np.ndarray
    gt_map: np.ndarray
    gt_resources: list[GroundTruthResource]
    gt_targets: dict[str, tuple[float, float, float]]
    gt_trajectories: dict[str, Trajectory]
    expected: KpiReport


@dataclass
class _Site:
    task_id: str
    pos: tuple[float, float, float]
    robot: str = ""
    failed: int = 0
    completes: bool = True


def _terrain_z(cfg: ScenarioConfig, x: float) -> float:
    return round((x - cfg.area_origin[0]) * math.tan(math.radians(cfg.terrain_slope_deg)), 6)


def _check(cfg: ScenarioConfig) -> None:
    W, H = cfg.area_size
    x0, y0 = cfg.area_origin
    res = cfg.map_resolution
    ids = [r.id for r in cfg.robots]
    if not cfg.robots:
        raise InfeasibleConfig("config needs at least one robot")
    if len(set(ids)) != len(ids):
        raise InfeasibleConfig("robot ids must be unique")
    for r in cfg.robots:
        if r.role not in ("scout", "scientist"):
            raise InfeasibleConfig(f"robot {r.id!r}: unknown role {r.role!r}")
        if not r.speed > 0:
            raise InfeasibleConfig(f"robot {r.id!r}: speed must be positive")
    if not cfg.sampling_interval > 0:
        raise InfeasibleConfig("sampling_interval must be positive")
    if not (W > 0 and H > 0 and res > 0 and cfg.pose_period > 0):
        raise InfeasibleConfig("area_size, map_resolution and pose_period must be positive")
    for name, v in (("area width", W), ("area height", H), ("origin x", x0), ("origin y", y0)):
        if not _is_multiple(v, res):
            raise InfeasibleConfig(f"{name} {v} is not a multiple of map_resolution {res}")
    scouts = cfg.role("scout")
    if scouts:
        band = H / len(scouts)
        for s in scouts:
            if not s.swath_width > 0 or not _is_multiple(band, s.swath_width):
                raise InfeasibleConfig(
                    f"scout {s.id!r}: band height {band} m is not a whole number of {s.swath_width} m swaths")
        if not _is_multiple(band, res):
            raise InfeasibleConfig(f"scout band height {band} is not a multiple of map_resolution")
    T = cfg.t_mission
    windows = list(cfg.unscheduled_manual) + list(cfg.scheduled_manual) + list(cfg.downtime)
    for w in windows:
        if w.robot not in ids:
            raise InfeasibleConfig(f"window for unknown robot {w.robot!r}")
        if not (w.duration > 0 and 0 <= w.start and w.end <= T):
            raise InfeasibleConfig(f"window {w} must have positive duration inside the mission span [0, {T}]")
    for w in cfg.downtime:
        if w.state not in ("idle", "fault"):
            raise InfeasibleConfig(f"downtime state must be idle or fault, got {w.state!r}")
    for rid in ids:
        mine = sorted((w.start, w.end) for w in windows if w.robot == rid)
        for (s1, e1), (s2, _) in zip(mine, mine[1:]):
            if s2 < e1:
                raise InfeasibleConfig(f"robot {rid!r}: injected windows overlap at t={s2}")
    for it in cfg.interactions:
        if it.channel is not None and it.channel not in ids:
            raise InfeasibleConfig(f"interaction on unknown channel {it.channel!r}")
        if not (it.duration >= 0 and 0 <= it.start and it.start + it.duration <= T):
            raise InfeasibleConfig(f"interaction {it} must lie inside the mission span [0, {T}]")
    for ch in {it.channel for it in cfg.interactions}:
        mine = sorted((it.start, it.start + it.duration) for it in cfg.interactions if it.channel == ch)
        for (s1, e1), (s2, _) in zip(mine, mine[1:]):
            if s2 < e1:
                raise InfeasibleConfig(f"interactions on channel {ch!r} overlap at t={s2}")
    if cfg.pose_noise_sigma < 0:
        raise InfeasibleConfig("pose_noise_sigma must be non-negative")
    if any(o < 0 for o in cfg.placement_offsets + cfg.remote_target_offsets) or cfg.map_offset_z < 0:
        raise InfeasibleConfig("offsets are distances and must be non-negative")
    if cfg.n_resources and not scouts:
        raise InfeasibleConfig("resources are detected by scouts; config has none")
    if cfg.remote_target_offsets and not scouts:
        raise InfeasibleConfig("remote targets are sensed by scouts; config has none")
    if cfg.tlx_score is not None and not 0 <= cfg.tlx_score <= 100:
        raise InfeasibleConfig("tlx_score out of range [0,100]")


def _lattice(cfg: ScenarioConfig) -> list[list[tuple[float, float]]]:
    W, H = cfg.area_size
    x0, y0 = cfg.area_origin
    s = cfg.sampling_interval
    nx = int(math.floor(W / s + 1e-9)) + 1
    ny = int(math.floor(H / s + 1e-9)) + 1
    return [[(x0 + i * s, y0 + j * s) for i in range(nx)] for j in range(ny)]


def _split(n: int, k: int) -> list[range]:
    """Split ``range(n)`` into ``k`` contiguous blocks, earlier blocks one larger."""
    out, start = [], 0
    for i in range(k):
        size = n // k + (1 if i < n % k else 0)
        out.append(range(start, start + size))
        start += size
    return out


def generate(cfg: ScenarioConfig) -> SimulationBundle:
    """Simulate one mission; identical configs give identical output."""
    _check(cfg)
    rng = XorShift64Star(cfg.seed)
    W, H = cfg.area_size
    x0, y0 = cfg.area_origin
    T = cfg.t_mission
    p1_start, p1_end = cfg.phase1
    p2_start = cfg.phase2[0]
    res = cfg.map_resolution
    scouts, scientists = cfg.role("scout"), cfg.role("scientist")
    pauses = {r.id: [w for w in cfg.downtime if w.robot == r.id] for r in cfg.robots}
    instrument = _INSTRUMENT.get(cfg.scenario, "spectrometer")

    # scouts: one band each, boustrophedon legs
    plans: dict[str, _Plan] = {}
    bands = {}
    for i, sc in enumerate(scouts):
        band = H / len(scouts)
        yb = y0 + i * band
        w = sc.swath_width
        n_legs = int(round(band / w))
        legs = []
        for k in range(n_legs):
            y = yb + (k + 0.5) * w
            xs, xe = (x0, x0 + W) if k % 2 == 0 else (x0 + W, x0)
            legs.append(((xs, y), (xe, y)))
        start = (legs[0][0][0], legs[0][0][1], _terrain_z(cfg, legs[0][0][0]))
        plan = _Plan(p1_start, start, pauses[sc.id])
        for (xs, y), (xe, _) in legs:
            plan.move((xs, y, _terrain_z(cfg, xs)), sc.speed)
            plan.move((xe, y, _terrain_z(cfg, xe)), sc.speed)
        if plan.end_wall > p1_end + 1e-9:
            raise InfeasibleConfig(
                f"phase 1 too short: scout {sc.id!r} finishes its traverse at t={plan.end_wall:.1f} s "
                f"but phase 1 ends at t={p1_end:.1f} s")
        plans[sc.id] = plan
        bands[sc.id] = (yb, band, w, n_legs)

    # scientists: lattice rows split into contiguous blocks, serpentine order
    rows = _lattice(cfg)
    failures = {f.task_id: f for f in cfg.task_failures}
    sites: list[_Site] = []
    flat = 0
    for r_idx, row in enumerate(rows):
        for x, y in row:
            sites.append(_Site(f"site_{flat:03d}", (x, y, _terrain_z(cfg, x))))
            flat += 1
    unknown = set(failures) - {s.task_id for s in sites}
    if unknown:
        raise InfeasibleConfig(f"task_failures reference unknown sites: {', '.join(sorted(unknown))}")
    if sites and not scientists:
        sites = []
    nx = len(rows[0])
    order: dict[str, list[_Site]] = {}
    for sci, block in zip(scientists, _split(len(rows), len(scientists))):
        mine = []
        for n, r_idx in enumerate(block):
            row_sites = sites[r_idx * nx:(r_idx + 1) * nx]
            mine += row_sites if n % 2 == 0 else row_sites[::-1]
        for s in mine:
            s.robot = sci.id
            if s.task_id in failures:
                s.failed = failures[s.task_id].failed_attempts
                s.completes = failures[s.task_id].completes
        order[sci.id] = mine

    events: list[list[Event]] = []
    completed_sites: list[_Site] = []
    measurement_events = []
    placement_events = []
    place_i = 0
    for sci in scientists:
        mine = order[sci.id]
        start = mine[0].pos if mine else (x0, y0, _terrain_z(cfg, x0))
        plan = _Plan(p2_start, start, pauses[sci.id])
        seq = [Event(p2_start, "task_assigned", sci.id, {"task_id": s.task_id, "task_type": "in_situ_measurement"})
               for s in mine]
        timed: list[tuple[float, str, _Site, int]] = []
        for s in mine:
            plan.move(s.pos, sci.speed)
            for a in range(s.failed):
                timed.append((plan.tau, "task_started", s, a))
                timed.append((plan.dwell(cfg.measurement_duration), "task_failed", s, a))
            if s.completes:
                timed.append((plan.tau, "task_started", s, s.failed))
                timed.append((plan.dwell(cfg.measurement_duration), "task_completed", s, s.failed))
        if plan.end_wall > T + 1e-9:
            raise InfeasibleConfig(
                f"phase 2 too short: scientist {sci.id!r} finishes its sites at t={plan.end_wall:.1f} s "
                f"but the mission ends at t={T:.1f} s")
        plans[sci.id] = plan
        for tau, kind, s, a in timed:
            t = plan.wall(tau)
            if kind == "task_started":
                seq.append(Event(t, kind, sci.id, {"task_id": s.task_id}))
            elif kind == "task_failed":
                seq.append(Event(t, kind, sci.id, {"task_id": s.task_id, "reason": "instrument contact lost"}))
                measurement_events.append(Event(t, "measurement", sci.id, {
                    "x": s.pos[0], "y": s.pos[1], "z": s.pos[2], "instrument": instrument, "valid": False}))
            else:
                seq.append(Event(t, kind, sci.id, {"task_id": s.task_id}))
                measurement_events.append(Event(t, "measurement", sci.id, {
                    "x": s.pos[0], "y": s.pos[1], "z": s.pos[2], "instrument": instrument, "valid": True}))
                off = cfg.placement_offsets[place_i % len(cfg.placement_offsets)] if cfg.placement_offsets else 0.0
                place_i += 1
                th = rng.angle()
                achieved = [_r9(s.pos[0] + off * math.cos(th)), _r9(s.pos[1] + off * math.sin(th)), s.pos[2]]
                placement_events.append(Event(t, "instrument_placement", sci.id, {
                    "commanded": tuple(s.pos), "achieved": tuple(achieved)}))
                completed_sites.append(s)
        events.append(seq)

    # ground-truth resources and remote targets, sensed by the scout owning the band
    def scout_for(y: float):
        for sc in scouts:
            yb, band, _, _ = bands[sc.id]
            if yb <= y < yb + band:
                return sc
        return scouts[-1]

    def pass_time(sc: RobotSpec, x: float, y: float) -> float:
        yb, band, w, n_legs = bands[sc.id]
        k = min(int((y - yb) // w), n_legs - 1)
        along = (x - x0) if k % 2 == 0 else (x0 + W - x)
        return plans[sc.id].wall((k * (W + w) + along) / sc.speed)

    def random_points(n: int, min_sep: float, margin: float):
        pts: list[tuple[float, float]] = []
        tries = 0
        while len(pts) < n:
            tries += 1
            if tries > 100000:
                raise InfeasibleConfig(f"cannot place {n} points {min_sep} m apart in the survey area")
            p = (round(rng.uniform(x0 + margin, x0 + W - margin), 3),
                 round(rng.uniform(y0 + margin, y0 + H - margin), 3))
            if all(math.dist(p, q) >= min_sep for q in pts):
                pts.append(p)
        return pts

    gt_resources = [GroundTruthResource(f"R{i + 1:03d}", x, y, _terrain_z(cfg, x), _RESOURCE.get(cfg.scenario, "resource"))
                    for i, (x, y) in enumerate(random_points(cfg.n_resources, 5.0, 1.0))]
    dropout = set(cfg.detection_dropout)
    unknown = dropout - {g.id for g in gt_resources}
    if unknown:
        raise InfeasibleConfig(f"detection_dropout references unknown resources: {', '.join(sorted(unknown))}")
    det_events = []
    for g in gt_resources:
        th = rng.angle()
        if g.id in dropout:
            continue
        sc = scout_for(g.y)
        det_events.append(Event(pass_time(sc, g.x, g.y), "resource_detected", sc.id, {
            "x": _r9(g.x + cfg.detection_offset * math.cos(th)),
            "y": _r9(g.y + cfg.detection_offset * math.sin(th)), "z": g.z, "resource_type": g.type}))
    for k in range(cfg.false_detections):
        sc = scouts[0]
        det_events.append(Event(plans[sc.id].end_wall, "resource_detected", sc.id, {
            "x": x0 - 20.0 - 10.0 * k, "y": y0 - 20.0, "z": 0.0, "resource_type": "unknown"}))

    gt_targets = {}
    remote_events = []
    for i, ((x, y), off) in enumerate(zip(random_points(len(cfg.remote_target_offsets), 2.0, 0.0),
                                          cfg.remote_target_offsets)):
        tid = f"T{i + 1:03d}"
        z = _terrain_z(cfg, x)
        gt_targets[tid] = (x, y, z)
        th = rng.angle()
        sc = scout_for(y)
        remote_events.append(Event(pass_time(sc, x, y), "remote_target", sc.id, {
            "target_id": tid, "x": _r9(x + off * math.cos(th)), "y": _r9(y + off * math.sin(th)), "z": z}))

    # robot states from elementary segments
    manual = {r.id: [(w, False) for w in cfg.unscheduled_manual if w.robot == r.id]
              + [(w, True) for w in cfg.scheduled_manual if w.robot == r.id] for r in cfg.robots}
    labels = {}
    for r in cfg.robots:
        labels[r.id] = _robot_segments(cfg, r.id, plans.get(r.id), manual[r.id], pauses[r.id])
        seq = []
        for a, _, (state, sched) in _runs(labels[r.id]):
            seq.append(Event(a, "robot_state", r.id, {"state": state, "scheduled": sched}))
        events.append(seq)

    # poses: regular samples plus every motion vertex
    grid = [k * cfg.pose_period for k in range(int(math.floor(T / cfg.pose_period + 1e-9)) + 1)]
    gt_traj = {}
    for r in cfg.robots:
        plan = plans.get(r.id)
        times = sorted({t for t in grid + (plan.vertex_times() if plan else []) if 0 <= t <= T})
        if plan is None:
            xyz = np.tile([x0, y0, _terrain_z(cfg, x0)], (len(times), 1))
        else:
            xyz = np.array([plan.position(t) for t in times])
        xyz = np.round(xyz, 9)
        gt_traj[r.id] = Trajectory(np.array(times), xyz)
        seq = []
        for t, p in zip(times, xyz.tolist()):
            if cfg.pose_noise_sigma > 0:
                p = [_r9(v + cfg.pose_noise_sigma * rng.normal()) for v in p]
            seq.append(Event(t, "pose", r.id, {"x": p[0], "y": p[1], "z": p[2]}))
        events.append(seq)

    ops = []
    for it in sorted(cfg.interactions, key=lambda i: (i.start, i.channel or "")):
        ops.append(Event(it.start, "operator_interaction_start", it.channel, {"kind": it.kind}))
        ops.append(Event(it.start + it.duration, "operator_interaction_end", it.channel, {}))

    merged = [Event(0.0, "mission_start")]
    body = [ev for seq in events for ev in seq] + measurement_events + placement_events + det_events + remote_events
    # operator events sort before robot events at equal times; per-channel order is preserved
    body = ops + body
    body.sort(key=lambda e: e.t)
    merged += body
    merged.append(Event(T, "mission_end"))

    # map: one point per grid cell centre of every scout band
    nxc = int(round(W / res))
    nyc = int(round(H / res)) if scouts else 0
    xs = x0 + (np.arange(nxc) + 0.5) * res
    ys = y0 + (np.arange(nyc) + 0.5) * res
    gx, gy = np.meshgrid(xs, ys)
    gz = np.round((gx - x0) * math.tan(math.radians(cfg.terrain_slope_deg)), 6)
    gt_map = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    map_cloud = gt_map.copy()
    map_cloud[:, 2] = np.round(map_cloud[:, 2] + cfg.map_offset_z, 9)

    manifest = Manifest(
        scenario=cfg.scenario,
        phase="full",
        robots=tuple(RobotInfo(r.id, r.role) for r in cfg.robots),
        tlx_score=cfg.tlx_score,
        events="events.jsonl",
        map_cloud="map_cloud.xyz",
        gt_map="gt_map.xyz",
        gt_resources="gt_resources.csv",
        gt_targets="gt_targets.csv",
        gt_trajectories={r.id: f"gt_traj_{r.id}.csv" for r in cfg.robots},
        phases={"setup": (0.0, cfg.setup_duration), "p1": cfg.phase1, "p2": cfg.phase2},
        extra={"generator": {"seed": cfg.seed, "rng": "xorshift64* seeded by splitmix64"},
               "metadata": cfg.metadata},
    )
    log = MissionLog(tuple(merged), manifest)
    expected = _expected(cfg, labels, completed_sites, order, gt_resources, dropout, plans)
    return SimulationBundle(cfg, log, map_cloud, gt_map, gt_resources, gt_targets, gt_traj, expected)


def _robot_segments(cfg, rid, plan, manual_windows, pause_windows):
    T = cfg.t_mission
    bounds = [0.0, T]
    if plan is not None:
        bounds += [plan.start_wall, plan.end_wall]
    for w, _ in manual_windows:
        bounds += [w.start, w.end]
    for w in pause_windows:
        bounds += [w.start, w.end]

    def label(t):
        for w, sched in manual_windows:
            if w.start < t < w.end:
                return ("manual", sched)
        for w in pause_windows:
            if w.start < t < w.end:
                return (w.state, False)
        if plan is not None and plan.start_wall < t < plan.end_wall:
            return ("active", False)
        if plan is not None and t < plan.start_wall:
            return ("idle", True)
        return ("idle", False)

    return _segments(bounds, label)


# -- expected report -------------------------------------------------------

def _exact(kpi_id, value, derivation, per_robot=None, components=None, tol=None):
    tol = EXACT_REL * max(1.0, abs(value)) if tol is None else tol
    return KpiValue(kpi_id, value, per_robot=per_robot, components=components,
                    tolerance=tol, comparison="abs", derivation=derivation)


def _nn_brute(points) -> list[float]:
    out = []
    for i, p in enumerate(points):
        out.append(min(math.dist(p, q) for j, q in enumerate(points) if j != i))
    return out


def expected_report(cfg: ScenarioConfig) -> KpiReport:
    """Closed-form KPI values for ``cfg`` (runs the generator's schedule, not the analysis)."""
    return generate(cfg).expected


def _expected(cfg, labels, completed_sites, order, gt_resources, dropout, plans) -> KpiReport:
    T = cfg.t_mission
    W, H = cfg.area_size
    res = cfg.map_resolution
    scouts = cfg.role("scout")
    scientists = cfg.role("scientist")
    vals: list[KpiValue] = []

    area = W * H if scouts else 0.0
    ring = 2.0 * (W + H) * res  # one cell of quantization around the survey boundary
    d_tot = 0.0
    for sc in scouts:
        n_legs = int(round(H / len(scouts) / sc.swath_width))
        d_tot += n_legs * W + (n_legs - 1) * sc.swath_width
    for sci in scientists:
        sites = order.get(sci.id, [])
        d_tot += sum(math.dist(a.pos, b.pos) for a, b in zip(sites, sites[1:]))
    if d_tot > 0:
        vals.append(_exact("E1", area / d_tot, "W*H / (sum_scouts(n_legs*W + (n_legs-1)*swath) + sum_scientists(path))",
                           tol=ring / d_tot if area else None))
    else:
        vals.append(not_applicable("E1", "robots traveled no distance"))
    vals.append(_exact("E2", area / T, "W*H / t_mission", tol=ring / T if area else None))

    all_sites = [s for sci in scientists for s in order.get(sci.id, [])]
    n_total = len(all_sites)
    n_completed = sum(s.completes for s in all_sites)
    n_attempts = sum(s.failed + (1 if s.completes else 0) for s in all_sites)
    if n_total:
        vals.append(_exact("E3", n_completed / n_total * 100.0, "completing sites / lattice sites * 100"))
    else:
        vals.append(not_applicable("E3", "no tasks"))
    if cfg.tlx_score is not None:
        vals.append(_exact("E4", float(cfg.tlx_score), "manifest tlx_score passthrough"))
    else:
        vals.append(not_applicable("E4", "no tlx_score"))
    busy = _union_length([(i.start, i.start + i.duration) for i in cfg.interactions])
    vals.append(_exact("E5", busy / T * 100.0, "|union of interaction windows| / t_mission * 100"))

    r1, r2, r3 = {}, {}, {}
    for r in cfg.robots:
        segs = labels[r.id]
        down = sum(b - a for a, b, (st, _) in segs if st in ("idle", "fault"))
        r1[r.id] = down / T * 100.0
        r3[r.id] = sum(b - a for a, b, (st, sched) in segs if st == "manual" and not sched) / T * 100.0
        mine = [(i.start, i.start + i.duration) for i in cfg.interactions if i.channel == r.id]
        if not mine:
            r2[r.id] = 1.0
            continue
        bounds = [a for a, _, _ in segs] + [T] + [v for w in mine for v in w]

        def free_active(t, segs=segs, mine=mine):
            st = next(lab for a, b, lab in segs if a <= t <= b)[0]
            return st == "active" and not any(s <= t <= e for s, e in mine)

        pieces = _segments(bounds, free_active)
        neglect = [(a, b) for a, b, ok in _runs(pieces) if ok]
        t_ie = sum(e - s for s, e in mine) / len(mine)
        t_nt = sum(b - a for a, b in neglect) / len(neglect) if neglect else 0.0
        r2[r.id] = 1.0 - (t_ie / (t_ie + t_nt) if t_ie + t_nt > 0 else 1.0)
    mean = lambda d: sum(d.values()) / len(d)  # noqa: E731
    vals.append(_exact("R1", mean(r1), "sum(idle+fault segments) / t_mission * 100, mean over robots", per_robot=r1))
    vals.append(_exact("R2", mean(r2), "1 - t_IE/(t_IE+t_NT) from scheduled windows, mean over robots", per_robot=r2))
    vals.append(_exact("R3", mean(r3), "unscheduled manual windows / t_mission * 100, mean over robots", per_robot=r3))
    if n_attempts:
        vals.append(_exact("R4", (n_attempts - n_completed) / n_attempts * 100.0,
                           "sum(failed attempts) / sum(attempts) * 100"))
    else:
        vals.append(not_applicable("R4", "no attempts"))

    n_valid = len(completed_sites)
    if area > 0 and all_sites:
        vals.append(_exact("P1", n_valid / area, "completed sites / (W*H)", tol=n_valid * ring / (area * (area - ring))))
    else:
        vals.append(not_applicable("P1", "no mapped area or no measurements"))
    if n_valid >= 2 and area > 0:
        pts = [s.pos[:2] for s in completed_sites]
        d_obs = sum(_nn_brute(pts)) / n_valid
        r = d_obs * 2.0 * math.sqrt(n_valid / area)
        lo_area = area - ring
        vals.append(_exact("P2", r, "brute-force mean NN distance * 2*sqrt(n/(W*H))",
                           tol=d_obs * 2.0 * math.sqrt(n_valid / lo_area) - r))
    else:
        vals.append(not_applicable("P2", "fewer than 2 valid measurements"))

    sigma = cfg.pose_noise_sigma
    if sigma == 0:
        vals.append(_exact("P3", 0.0, "noiseless poses", tol=GEOM_ABS))
    else:
        vals.append(KpiValue("P3", sigma * math.sqrt(3.0), tolerance=sigma * (3.0 - math.sqrt(3.0)), comparison="le",
                             derivation="per-axis Gaussian noise: RMSE ~ sigma*sqrt(3); must not exceed 3*sigma"))

    if n_valid:
        offs = cfg.placement_offsets or (0.0,)
        applied = [offs[i % len(offs)] for i in range(n_valid)]
        med = float(median(applied))
        rm = math.sqrt(sum(o * o for o in applied) / len(applied))
        vals.append(_exact("P4", med, "median of applied placement offsets (RMSE in components)",
                           components={"median": med, "rmse": rm}, tol=GEOM_ABS))
    else:
        vals.append(not_applicable("P4", "no placements"))
    if cfg.remote_target_offsets:
        o = cfg.remote_target_offsets
        vals.append(_exact("P5", math.sqrt(sum(v * v for v in o) / len(o)), "RMSE of remote_target_offsets",
                           tol=GEOM_ABS))
    else:
        vals.append(not_applicable("P5", "no remote targets"))
    if area > 0:
        vals.append(_exact("P6", abs(cfg.map_offset_z), "constant vertical map offset", tol=GEOM_ABS))
    else:
        vals.append(not_applicable("P6", "no map"))
    if gt_resources:
        found = len(gt_resources) - len(dropout)
        vals.append(_exact("P7", found / len(gt_resources) * 100.0, "(N_gt - dropouts) / N_gt * 100"))
    else:
        vals.append(not_applicable("P7", "no ground-truth resources"))

    manifest = Manifest(scenario=cfg.scenario, phase="full")
    return assemble_report(vals, manifest, config={"seed": cfg.seed, "t_mission_s": T}, kind="expected")


# -- bundle output -----------------------------------------------------------

def write_bundle(bundle: SimulationBundle, out_dir) -> Path:
    """Write the mission files, ground truth, expected report and config echo."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = bundle.log.manifest
    write_events(bundle.log.events, out / m.events)
    write_cloud(bundle.map_cloud, out / m.map_cloud)
    write_cloud(bundle.gt_map, out / m.gt_map)
    write_gt_resources(bundle.gt_resources, out / m.gt_resources)
    write_gt_targets(bundle.gt_targets, out / m.gt_targets)
    for rid, traj in bundle.gt_trajectories.items():
        write_trajectory(traj, out / m.gt_trajectories[rid])
    with open(out / "mission.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(m.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(out / "expected_report.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(bundle.expected.to_json())
    with open(out / "scenario_config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(bundle.config.to_dict(), fh, indent=2)
        fh.write("\n")
    return out / "mission.json"


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, seed=seed)
