"""Mission event model, log parsing, validation and stream extraction.

An event log is UTF-8 JSON Lines: one object per line with keys ``t``
(mission-relative seconds), ``robot`` (string or null) and ``type``, plus the
payload keys of that event type. Unknown keys are kept on the event and
written back out, but nothing downstream reads them.

A mission is described by a ``mission.json`` manifest that points at the event
log, the map cloud and the ground-truth files by relative path.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .geometry import Trajectory, as_points

SCENARIOS = ("s1", "s2", "s3", "custom")
PHASES = ("p1", "p2", "full")
ROLES = ("scout", "scientist")
ROBOT_STATES = ("idle", "active", "fault", "manual")

# payload schema per event type: (key, kind); kinds are num, str, bool, vec3
EVENT_SCHEMA: dict[str, tuple[tuple[str, str], ...]] = {
    "mission_start": (),
    "mission_end": (),
    "task_assigned": (("task_id", "str"), ("task_type", "str")),
    "task_started": (("task_id", "str"),),
    "task_completed": (("task_id", "str"),),
    "task_failed": (("task_id", "str"), ("reason", "str")),
    "robot_state": (("state", "str"), ("scheduled", "bool")),
    "operator_interaction_start": (("kind", "str"),),
    "operator_interaction_end": (),
    "pose": (("x", "num"), ("y", "num"), ("z", "num")),
    "measurement": (("x", "num"), ("y", "num"), ("z", "num"), ("instrument", "str"), ("valid", "bool")),
    "resource_detected": (("x", "num"), ("y", "num"), ("z", "num"), ("resource_type", "str")),
    "instrument_placement": (("commanded", "vec3"), ("achieved", "vec3")),
    "remote_target": (("target_id", "str"), ("x", "num"), ("y", "num"), ("z", "num")),
}
OPTIONAL_FIELDS = {("robot_state", "scheduled"): False}

TASK_EVENTS = ("task_assigned", "task_started", "task_completed", "task_failed")
OPERATOR_EVENTS = ("operator_interaction_start", "operator_interaction_end")
MISSION_MARKERS = ("mission_start", "mission_end")
# event types that only make sense for a specific robot
ROBOT_SCOPED = (
    "task_started", "task_completed", "task_failed", "robot_state", "pose",
    "measurement", "resource_detected", "instrument_placement", "remote_target",
)


class LogFormatError(ValueError):
    """A log or manifest file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"{message} at line {line}" if line is not None else message)


@dataclass(frozen=True)
class Event:
    t: float
    type: str
    robot: str | None = None
    data: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)
    line: int | None = field(default=None, compare=False)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def xyz(self) -> tuple[float, float, float]:
        return (self.data["x"], self.data["y"], self.data["z"])

    @property
    def channel(self) -> str | None:
        """Operator-interaction channel: the robot id, or None for the team."""
        return self.robot


@dataclass(frozen=True)
class RobotInfo:
    id: str
    role: str


@dataclass(frozen=True)
class Manifest:
    scenario: str = "custom"
    phase: str = "full"
    robots: tuple[RobotInfo, ...] = ()
    tlx_score: float | None = None
    events: str | None = None
    map_cloud: str | None = None
    gt_map: str | None = None
    gt_resources: str | None = None
    gt_targets: str | None = None
    gt_trajectories: dict[str, str] = field(default_factory=dict)
    count_scheduled_waits_as_idle: bool = True
    phases: dict[str, tuple[float, float]] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)
    base_dir: Path | None = field(default=None, compare=False)

    def resolve(self, name: str) -> Path | None:
        """Absolute path of a referenced file, or None if not referenced."""
        rel = getattr(self, name)
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() or self.base_dir is None else self.base_dir / p

    def resolve_trajectory(self, robot: str) -> Path | None:
        rel = self.gt_trajectories.get(robot)
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() or self.base_dir is None else self.base_dir / p

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario,
            "phase": self.phase,
            "robots": [{"id": r.id, "role": r.role} for r in self.robots],
            "tlx_score": self.tlx_score,
            "events": self.events,
            "map_cloud": self.map_cloud,
            "gt_map": self.gt_map,
            "gt_resources": self.gt_resources,
            "gt_targets": self.gt_targets,
            "gt_trajectories": dict(self.gt_trajectories),
            "count_scheduled_waits_as_idle": self.count_scheduled_waits_as_idle,
            "phases": {k: list(v) for k, v in self.phases.items()},
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "Manifest":
        known = {f for f in cls.__dataclass_fields__ if f not in ("extra", "base_dir")}
        scenario = d.get("scenario") or "custom"
        phase = d.get("phase") or "full"
        if scenario not in SCENARIOS:
            raise LogFormatError(f"manifest: unknown scenario {scenario!r}")
        if phase not in PHASES:
            raise LogFormatError(f"manifest: unknown phase {phase!r}")
        robots = []
        for r in d.get("robots") or []:
            if not isinstance(r, dict) or "id" not in r:
                raise LogFormatError("manifest: robot entries need an 'id'")
            role = r.get("role", "scout")
            if role not in ROLES:
                raise LogFormatError(f"manifest: unknown role {role!r} for robot {r['id']!r}")
            robots.append(RobotInfo(str(r["id"]), role))
        tlx = d.get("tlx_score")
        if tlx is not None and (isinstance(tlx, bool) or not isinstance(tlx, (int, float))):
            raise LogFormatError("manifest: tlx_score must be a number")
        return cls(
            scenario=scenario,
            phase=phase,
            robots=tuple(robots),
            tlx_score=None if tlx is None else float(tlx),
            events=d.get("events"),
            map_cloud=d.get("map_cloud"),
            gt_map=d.get("gt_map"),
            gt_resources=d.get("gt_resources"),
            gt_targets=d.get("gt_targets"),
            gt_trajectories=dict(d.get("gt_trajectories") or {}),
            count_scheduled_waits_as_idle=bool(d.get("count_scheduled_waits_as_idle", True)),
            phases={k: (float(v[0]), float(v[1])) for k, v in (d.get("phases") or {}).items()},
            extra={k: v for k, v in d.items() if k not in known},
            base_dir=base_dir,
        )


@dataclass(frozen=True)
class MissionLog:
    events: tuple[Event, ...]
    manifest: Manifest = field(default_factory=Manifest)

    def _marker(self, kind: str) -> float:
        for ev in self.events:
            if ev.type == kind:
                return ev.t
        raise ValueError(f"log has no {kind} event")

    @property
    def span(self) -> tuple[float, float]:
        return self._marker("mission_start"), self._marker("mission_end")

    @property
    def t_mission(self) -> float:
        t0, t1 = self.span
        return t1 - t0

    @property
    def robot_ids(self) -> list[str]:
        """Roster robots first, then any robot seen only in the events."""
        ids = [r.id for r in self.manifest.robots]
        seen = set(ids)
        for ev in self.events:
            if ev.robot is not None and ev.robot not in seen:
                seen.add(ev.robot)
                ids.append(ev.robot)
        return ids


# -- parsing ---------------------------------------------------------------

def _coerce(kind: str, key: str, value, line: int | None):
    if kind == "num":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise LogFormatError(f"field {key!r} must be a number", line)
        if not math.isfinite(value):
            raise LogFormatError(f"field {key!r} must be finite", line)
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise LogFormatError(f"field {key!r} must be a string", line)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise LogFormatError(f"field {key!r} must be a boolean", line)
        return value
    if kind == "vec3":
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            raise LogFormatError(f"field {key!r} must be a list of 3 numbers", line)
        return tuple(_coerce("num", key, v, line) for v in value)
    raise AssertionError(kind)


def event_from_dict(obj: dict, line: int | None = None) -> Event:
    if not isinstance(obj, dict):
        raise LogFormatError("malformed line: expected a JSON object", line)
    kind = obj.get("type")
    if kind is None:
        raise LogFormatError("missing required field 'type'", line)
    if kind not in EVENT_SCHEMA:
        raise LogFormatError(f"unknown event kind {kind!r}", line)
    if "t" not in obj:
        raise LogFormatError("missing required field 't'", line)
    t = _coerce("num", "t", obj["t"], line)
    robot = obj.get("robot")
    if robot is not None and not isinstance(robot, str):
        raise LogFormatError("field 'robot' must be a string or null", line)
    data = {}
    for key, fkind in EVENT_SCHEMA[kind]:
        if key in obj:
            data[key] = _coerce(fkind, key, obj[key], line)
        elif (kind, key) in OPTIONAL_FIELDS:
            data[key] = OPTIONAL_FIELDS[(kind, key)]
        else:
            raise LogFormatError(f"missing required field {key!r} for {kind}", line)
    if kind == "robot_state" and data["state"] not in ROBOT_STATES:
        raise LogFormatError(f"unknown robot state {data['state']!r}", line)
    schema_keys = {k for k, _ in EVENT_SCHEMA[kind]} | {"t", "robot", "type"}
    extra = {k: v for k, v in obj.items() if k not in schema_keys}
    return Event(t=t, type=kind, robot=robot, data=data, extra=extra, line=line)


def event_to_dict(ev: Event) -> dict:
    d: dict[str, Any] = {"t": ev.t, "robot": ev.robot, "type": ev.type}
    for key, kind in EVENT_SCHEMA[ev.type]:
        v = ev.data[key]
        d[key] = list(v) if kind == "vec3" else v
    d.update(ev.extra)
    return d


def dumps_event(ev: Event) -> str:
    return json.dumps(event_to_dict(ev), separators=(",", ":"), allow_nan=False)


def parse_events(lines: Iterable[str]) -> list[Event]:
    events = []
    for n, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"malformed line ({exc.msg})", n) from None
        events.append(event_from_dict(obj, n))
    return events


def parse_log(path, manifest: Manifest | None = None) -> MissionLog:
    """Read a mission from a ``mission.json`` manifest or a bare JSONL event file.

    A bare event file gets a default manifest (scenario ``custom``, phase
    ``full``) unless one is passed in.
    """
    path = Path(path)
    if path.suffix == ".json":
        return load_mission(path)
    try:
        with open(path, encoding="utf-8") as fh:
            events = parse_events(fh)
    except OSError as exc:
        raise LogFormatError(f"cannot read {path}: {exc.strerror}") from exc
    return MissionLog(tuple(events), manifest or Manifest(base_dir=path.parent))


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise LogFormatError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"manifest is not valid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict):
        raise LogFormatError("manifest must be a JSON object")
    return Manifest.from_dict(doc, base_dir=path.parent)


def load_mission(path) -> MissionLog:
    manifest = load_manifest(path)
    events_path = manifest.resolve("events")
    if events_path is None:
        raise LogFormatError("manifest does not reference an event log ('events')")
    return parse_log(events_path, manifest)


def write_events(events: Iterable[Event], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ev in events:
            fh.write(dumps_event(ev))
            fh.write("\n")


def normalize_log_text(text: str) -> str:
    """Canonical form of an event log: parse, then serialize each event."""
    return "".join(dumps_event(ev) + "\n" for ev in parse_events(text.splitlines()))


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    index: int | None = None
    line: int | None = None

    def __str__(self):
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.code}: {self.message}"


def validate_log(log: MissionLog) -> list[Violation]:
    """Check every structural invariant of a parsed log.

    Returns the list of violations; an empty list means the log is valid.
    """
    out: list[Violation] = []

    def flag(code, msg, i=None):
        line = log.events[i].line if i is not None else None
        out.append(Violation(code, msg, i, line))

    events = log.events
    starts = [i for i, e in enumerate(events) if e.type == "mission_start"]
    ends = [i for i, e in enumerate(events) if e.type == "mission_end"]
    if not starts:
        flag("missing_mission_start", "log has no mission_start event")
    elif len(starts) > 1:
        for i in starts[1:]:
            flag("duplicate_mission_start", "mission_start occurs more than once", i)
    if not ends:
        flag("missing_mission_end", "log has no mission_end event")
    elif len(ends) > 1:
        for i in ends[1:]:
            flag("duplicate_mission_end", "mission_end occurs more than once", i)
    if starts and starts[0] != 0:
        flag("event_before_mission_start", "events precede mission_start", 0)
    if ends and ends[-1] != len(events) - 1:
        flag("event_after_mission_end", "events follow mission_end", ends[-1] + 1)
    if starts and ends and events[ends[0]].t - events[starts[0]].t <= 0:
        flag("nonpositive_mission_span", "mission_end must come strictly after mission_start", ends[0])

    roster = {r.id for r in log.manifest.robots}
    assigned: set[str] = set()
    open_attempt: dict[str, bool] = {}
    completed: set[str] = set()
    open_channels: set = set()
    prev_t = None
    for i, ev in enumerate(events):
        if ev.t < 0:
            flag("negative_time", f"timestamp {ev.t} is negative", i)
        if prev_t is not None and ev.t < prev_t:
            flag("non_monotonic_time", f"non-monotonic time: t={ev.t} after t={prev_t}", i)
        prev_t = ev.t if prev_t is None else max(prev_t, ev.t)

        if ev.type in ROBOT_SCOPED and ev.robot is None:
            flag("missing_robot", f"{ev.type} event has no robot", i)
        if roster and ev.robot is not None and ev.robot not in roster:
            flag("unknown_robot", f"robot {ev.robot!r} is not in the manifest roster", i)

        if ev.type == "task_assigned":
            tid = ev["task_id"]
            if tid in assigned:
                flag("duplicate_task_assignment", f"task {tid!r} assigned twice", i)
            assigned.add(tid)
        elif ev.type == "task_started":
            tid = ev["task_id"]
            if tid not in assigned:
                flag("unassigned_task", f"unassigned task {tid!r} started", i)
            if tid in completed:
                flag("task_after_completion", f"task {tid!r} restarted after completion", i)
            if open_attempt.get(tid):
                flag("task_already_open", f"task {tid!r} started while an attempt is open", i)
            open_attempt[tid] = True
        elif ev.type in ("task_completed", "task_failed"):
            tid = ev["task_id"]
            if tid not in assigned:
                flag("unassigned_task", f"unassigned task {tid!r} in {ev.type}", i)
            if not open_attempt.get(tid):
                flag("task_outcome_without_start", f"{ev.type} for {tid!r} without an open attempt", i)
            open_attempt[tid] = False
            if ev.type == "task_completed":
                completed.add(tid)
        elif ev.type == "operator_interaction_start":
            if ev.channel in open_channels:
                flag("nested_interaction_start", f"interaction started on channel {ev.channel!r} while one is open", i)
            open_channels.add(ev.channel)
        elif ev.type == "operator_interaction_end":
            if ev.channel not in open_channels:
                flag("unpaired_interaction_end", f"interaction end on channel {ev.channel!r} without a start", i)
            open_channels.discard(ev.channel)

    tlx = log.manifest.tlx_score
    if tlx is not None and not (0.0 <= tlx <= 100.0):
        flag("tlx_out_of_range", f"tlx_score {tlx} out of range [0,100]")
    return out


# -- stream extraction -----------------------------------------------------

@dataclass
class RobotStreams:
    robot: str | None
    tasks: list[Event] = field(default_factory=list)
    states: list[Event] = field(default_factory=list)
    poses: list[Event] = field(default_factory=list)
    measurements: list[Event] = field(default_factory=list)
    detections: list[Event] = field(default_factory=list)
    placements: list[Event] = field(default_factory=list)
    remote_targets: list[Event] = field(default_factory=list)

    def all_events(self) -> list[Event]:
        return (self.tasks + self.states + self.poses + self.measurements
                + self.detections + self.placements + self.remote_targets)

    def trajectory(self) -> Trajectory:
        """Pose stream as a trajectory; a repeated timestamp keeps the last pose."""
        by_t: dict[float, tuple] = {}
        for ev in self.poses:
            by_t[ev.t] = ev.xyz
        ts = sorted(by_t)
        return Trajectory(np.array(ts), np.array([by_t[t] for t in ts]).reshape(-1, 3))


_STREAM_OF = {
    "task_assigned": "tasks", "task_started": "tasks", "task_completed": "tasks", "task_failed": "tasks",
    "robot_state": "states", "pose": "poses", "measurement": "measurements",
    "resource_detected": "detections", "instrument_placement": "placements", "remote_target": "remote_targets",
}


@dataclass
class Streams:
    robots: dict[str, RobotStreams]
    operator: list[Event]
    # robot-scoped events logged without a robot (only in invalid logs)
    unattributed: RobotStreams

    def total(self) -> int:
        return (sum(len(s.all_events()) for s in self.robots.values())
                + len(self.operator) + len(self.unattributed.all_events()))

    def all_tasks(self) -> list[Event]:
        out = list(self.unattributed.tasks)
        for s in self.robots.values():
            out.extend(s.tasks)
        return sorted(out, key=lambda e: e.t)


def extract_streams(log: MissionLog) -> Streams:
    """Partition the non-marker events of ``log`` into per-robot streams.

    Operator interaction events go to a single operator stream regardless of
    channel. File order is preserved within every stream.
    """
    robots = {rid: RobotStreams(rid) for rid in log.robot_ids}
    unattributed = RobotStreams(None)
    operator: list[Event] = []
    for ev in log.events:
        if ev.type in MISSION_MARKERS:
            continue
        if ev.type in OPERATOR_EVENTS:
            operator.append(ev)
            continue
        target = robots[ev.robot] if ev.robot is not None else unattributed
        getattr(target, _STREAM_OF[ev.type]).append(ev)
    return Streams(robots, operator, unattributed)


# -- ground-truth and cloud files ------------------------------------------

def _read_csv(path, columns: tuple[str, ...]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in columns):
            raise LogFormatError(f"{Path(path).name}: header must contain {', '.join(columns)}", 1)
        rows = []
        for n, row in enumerate(reader, start=2):
            rows.append(row)
            for c in columns:
                if row.get(c) in (None, ""):
                    raise LogFormatError(f"{Path(path).name}: missing value for {c!r}", n)
        return rows


def _float(v: str, name: str, line: int) -> float:
    try:
        x = float(v)
    except ValueError:
        raise LogFormatError(f"{name}: {v!r} is not a number", line) from None
    if not math.isfinite(x):
        raise LogFormatError(f"{name}: value must be finite", line)
    return x


@dataclass(frozen=True)
class GroundTruthResource:
    id: str
    x: float
    y: float
    z: float
    type: str

    @property
    def xyz(self):
        return (self.x, self.y, self.z)


def read_gt_resources(path) -> list[GroundTruthResource]:
    rows = _read_csv(path, ("id", "x", "y", "z", "type"))
    name = Path(path).name
    return [GroundTruthResource(r["id"], *(_float(r[c], name, n) for c in "xyz"), r["type"])
            for n, r in enumerate(rows, start=2)]


def read_gt_targets(path) -> dict[str, tuple[float, float, float]]:
    rows = _read_csv(path, ("target_id", "x", "y", "z"))
    name = Path(path).name
    return {r["target_id"]: tuple(_float(r[c], name, n) for c in "xyz") for n, r in enumerate(rows, start=2)}


def read_trajectory(path) -> Trajectory:
    rows = _read_csv(path, ("t", "x", "y", "z"))
    name = Path(path).name
    samples = [[_float(r[c], name, n) for c in ("t", "x", "y", "z")] for n, r in enumerate(rows, start=2)]
    return Trajectory.from_samples(samples)


def read_cloud(path) -> np.ndarray:
    """Read a whitespace-separated ``x y z`` point file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return np.zeros((0, 3))
    try:
        arr = np.loadtxt(io.StringIO(text), dtype=float, ndmin=2)
    except ValueError as exc:
        raise LogFormatError(f"{Path(path).name}: {exc}") from None
    if arr.shape[1] != 3:
        raise LogFormatError(f"{Path(path).name}: expected 3 columns, found {arr.shape[1]}")
    return as_points(arr, 3)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_gt_resources(resources: Iterable[GroundTruthResource], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "z", "type"])
        for r in resources:
            w.writerow([r.id, _fmt(r.x), _fmt(r.y), _fmt(r.z), r.type])


def write_gt_targets(targets: dict[str, tuple], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target_id", "x", "y", "z"])
        for tid, xyz in targets.items():
            w.writerow([tid, *(_fmt(v) for v in xyz)])


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "z"])
        for t, p in zip(traj.t, traj.xyz):
            w.writerow([_fmt(t), *(_fmt(v) for v in p)])


def write_cloud(points, path) -> None:
    pts = as_points(points, 3)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())
