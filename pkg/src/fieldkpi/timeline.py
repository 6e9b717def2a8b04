"""Interval algebra and per-robot activity timelines.

Intervals are closed and touching intervals merge, so an ``IntervalSet`` is
determined by its measure-carrying pieces; zero-length pieces are dropped on
construction. Interaction episodes are kept as a plain list instead because a
zero-length intervention still counts as an intervention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .telemetry import Event, RobotStreams

STATES = ("idle", "active", "fault", "manual")


class TimelineError(ValueError):
    """Event streams that cannot be turned into a consistent timeline."""


@dataclass(frozen=True, order=True)
class Interval:
    start: float
    end: float

    def __post_init__(self):
        if not self.start <= self.end:
            raise ValueError(f"interval start {self.start} exceeds end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start


class IntervalSet:
    """Sorted, pairwise-disjoint, non-touching closed intervals."""

    __slots__ = ("_iv",)

    def __init__(self, intervals: Iterable = ()):
        pairs = []
        for iv in intervals:
            s, e = (iv.start, iv.end) if isinstance(iv, Interval) else iv
            s, e = float(s), float(e)
            if s > e:
                raise ValueError(f"interval start {s} exceeds end {e}")
            if e > s:
                pairs.append((s, e))
        pairs.sort()
        merged: list[list[float]] = []
        for s, e in pairs:
            if merged and s <= merged[-1][1]:
                if e > merged[-1][1]:
                    merged[-1][1] = e
            else:
                merged.append([s, e])
        self._iv = tuple(Interval(s, e) for s, e in merged)

    @classmethod
    def _trusted(cls, intervals: list[Interval]) -> "IntervalSet":
        out = cls.__new__(cls)
        out._iv = tuple(intervals)
        return out

    def __iter__(self):
        return iter(self._iv)

    def __len__(self):
        return len(self._iv)

    def __bool__(self):
        return bool(self._iv)

    def __getitem__(self, i):
        return self._iv[i]

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._iv == other._iv

    def __hash__(self):
        return hash(self._iv)

    def __repr__(self):
        body = ", ".join(f"[{iv.start:g}, {iv.end:g}]" for iv in self._iv)
        return f"IntervalSet({{{body}}})"

    def as_tuples(self) -> list[tuple[float, float]]:
        return [(iv.start, iv.end) for iv in self._iv]

    @property
    def total_duration(self) -> float:
        return sum(iv.end - iv.start for iv in self._iv)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self._iv + tuple(other))

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        a, b = self._iv, tuple(other)
        i = j = 0
        out = []
        while i < len(a) and j < len(b):
            s = max(a[i].start, b[j].start)
            e = min(a[i].end, b[j].end)
            if e > s:
                out.append(Interval(s, e))
            if a[i].end < b[j].end:
                i += 1
            else:
                j += 1
        return IntervalSet._trusted(out)

    def complement(self, span) -> "IntervalSet":
        """Complement within ``span`` (an Interval or a (start, end) pair)."""
        lo, hi = (span.start, span.end) if isinstance(span, Interval) else map(float, span)
        out = []
        cursor = lo
        for iv in self._iv:
            if iv.end <= lo:
                continue
            if iv.start >= hi:
                break
            if iv.start > cursor:
                out.append(Interval(cursor, iv.start))
            cursor = max(cursor, iv.end)
        if hi > cursor:
            out.append(Interval(cursor, hi))
        return IntervalSet._trusted(out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        if not self._iv:
            return self
        if not isinstance(other, IntervalSet):
            other = IntervalSet(other)
        return self.intersection(other.complement((self._iv[0].start, self._iv[-1].end)))

    __or__ = union
    __and__ = intersection
    __sub__ = difference


def interval_union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return a.union(b)


def interval_intersection(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return a.intersection(b)


def total_duration(s: IntervalSet) -> float:
    return s.total_duration


@dataclass(frozen=True)
class TaskAttempt:
    task_id: str
    attempt: int
    start: float
    end: float
    outcome: str  # completed | failed | open


@dataclass(frozen=True)
class RobotTimeline:
    robot: str
    span: tuple[float, float]
    state_intervals: dict[str, IntervalSet]
    task_episodes: tuple[TaskAttempt, ...] = ()
    unscheduled_manual: IntervalSet = field(default_factory=IntervalSet)
    scheduled_idle: IntervalSet = field(default_factory=IntervalSet)

    @property
    def t_mission(self) -> float:
        return self.span[1] - self.span[0]


def build_timeline(streams: RobotStreams, span: tuple[float, float], robot: str | None = None) -> RobotTimeline:
    """Reconstruct one robot's state partition and task attempts.

    The robot is idle until its first ``robot_state`` event. Several state
    events at the same instant resolve to the last one.
    """
    t0, t1 = float(span[0]), float(span[1])
    pieces: dict[str, list[tuple[float, float]]] = {s: [] for s in STATES}
    unscheduled: list[tuple[float, float]] = []
    sched_idle: list[tuple[float, float]] = []

    state, scheduled, since = "idle", False, t0

    def close(until):
        if until > since:
            pieces[state].append((since, until))
            if state == "manual" and not scheduled:
                unscheduled.append((since, until))
            if state == "idle" and scheduled:
                sched_idle.append((since, until))

    for ev in sorted(streams.states, key=lambda e: e.t):
        t = min(max(ev.t, t0), t1)
        close(t)
        state, scheduled, since = ev["state"], bool(ev["scheduled"]), t
    close(t1)

    return RobotTimeline(
        robot=robot if robot is not None else streams.robot,
        span=(t0, t1),
        state_intervals={s: IntervalSet(p) for s, p in pieces.items()},
        task_episodes=tuple(_task_attempts(streams.tasks, t1)),
        unscheduled_manual=IntervalSet(unscheduled),
        scheduled_idle=IntervalSet(sched_idle),
    )


def _task_attempts(task_events: list[Event], t_end: float) -> list[TaskAttempt]:
    attempts: list[TaskAttempt] = []
    opened: dict[str, tuple[int, float]] = {}
    counts: dict[str, int] = {}
    for ev in sorted(task_events, key=lambda e: e.t):
        if ev.type == "task_assigned":
            continue
        tid = ev["task_id"]
        if ev.type == "task_started":
            if tid in opened:
                raise TimelineError(f"task {tid!r} started at t={ev.t} while an attempt is open")
            counts[tid] = counts.get(tid, 0) + 1
            opened[tid] = (counts[tid], ev.t)
        else:
            if tid not in opened:
                raise TimelineError(f"{ev.type} for task {tid!r} at t={ev.t} without an open attempt")
            n, start = opened.pop(tid)
            outcome = "completed" if ev.type == "task_completed" else "failed"
            attempts.append(TaskAttempt(tid, n, start, ev.t, outcome))
    for tid, (n, start) in opened.items():
        attempts.append(TaskAttempt(tid, n, start, t_end, "open"))
    attempts.sort(key=lambda a: (a.start, a.task_id, a.attempt))
    return attempts


@dataclass(frozen=True)
class Episode:
    start: float
    end: float
    channel: str | None
    kind: str = ""
    unterminated: bool = False

    @property
    def duration(self) -> float:
        return self.end - self.start


def interaction_episodes(operator_events: Iterable[Event], span: tuple[float, float]) -> dict[str | None, list[Episode]]:
    """Pair interaction start/end events per channel.

    A start still open at mission end is closed there and flagged
    ``unterminated``.
    """
    out: dict[str | None, list[Episode]] = {}
    open_: dict[str | None, Event] = {}
    for ev in sorted(operator_events, key=lambda e: e.t):
        ch = ev.channel
        if ev.type == "operator_interaction_start":
            if ch in open_:
                raise TimelineError(f"interaction start on channel {ch!r} at t={ev.t} while one is open")
            open_[ch] = ev
        elif ev.type == "operator_interaction_end":
            if ch not in open_:
                raise TimelineError(f"interaction end on channel {ch!r} at t={ev.t} without a start")
            st = open_.pop(ch)
            out.setdefault(ch, []).append(Episode(st.t, ev.t, ch, st["kind"]))
    for ch, st in open_.items():
        out.setdefault(ch, []).append(Episode(st.t, max(st.t, float(span[1])), ch, st["kind"], True))
    for eps in out.values():
        eps.sort(key=lambda e: e.start)
    return out


def episodes_to_set(episodes: Iterable[Episode]) -> IntervalSet:
    return IntervalSet((e.start, e.end) for e in episodes)


def neglect_intervals(timeline: RobotTimeline, episodes: Iterable[Episode]) -> IntervalSet:
    """Active time not covered by any interaction episode on the robot's channel."""
    return timeline.state_intervals["active"] - episodes_to_set(episodes)
