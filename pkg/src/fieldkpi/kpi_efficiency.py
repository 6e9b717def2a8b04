"""Efficiency KPIs: mapping efficiency and rate, task success, operator workload."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import NotApplicable
from .geometry import CoverageResult, traveled_distance
from .telemetry import Event, Manifest
from .timeline import Episode, IntervalSet, TaskAttempt


@dataclass(frozen=True)
class TaskStats:
    n_total: int
    n_completed: int
    n_attempts: int
    n_success: int
    never_started: tuple[str, ...] = ()


def task_stats(task_events: Iterable[Event], attempts: Iterable[TaskAttempt]) -> TaskStats:
    """Count assigned tasks, completed tasks, attempts and successful attempts.

    Tasks are counted by distinct assigned ``task_id``; tasks that were
    assigned but never started stay in the total and are listed separately.
    """
    assigned: dict[str, None] = {}
    for ev in task_events:
        if ev.type == "task_assigned":
            assigned.setdefault(ev["task_id"], None)
    attempts = list(attempts)
    done = {a.task_id for a in attempts if a.outcome == "completed"}
    tried = {a.task_id for a in attempts}
    return TaskStats(
        n_total=len(assigned),
        n_completed=len(done.intersection(assigned)),
        n_attempts=len(attempts),
        n_success=sum(a.outcome == "completed" for a in attempts),
        never_started=tuple(t for t in assigned if t not in tried),
    )


def _area(area) -> float:
    return area.area if isinstance(area, CoverageResult) else float(area)


def total_distance(trajectories) -> float:
    if isinstance(trajectories, Mapping):
        trajectories = trajectories.values()
    return sum(traveled_distance(tr) for tr in trajectories)


def mapping_efficiency(area, trajectories) -> float:
    """Mapped area per meter traveled by the whole team (m^2/m)."""
    d_tot = total_distance(trajectories)
    if d_tot <= 0:
        raise NotApplicable("robots traveled no distance")
    return _area(area) / d_tot


def mapping_rate(area, t_mission: float) -> float:
    if t_mission <= 0:
        raise NotApplicable("mission span is not positive")
    return _area(area) / t_mission


def task_success_ratio(stats: TaskStats) -> float:
    if stats.n_total == 0:
        raise NotApplicable("no tasks were assigned")
    return stats.n_completed / stats.n_total * 100.0


def _flatten(episodes) -> list[Episode]:
    if isinstance(episodes, Mapping):
        return [e for eps in episodes.values() for e in eps]
    return list(episodes)


def quantitative_operator_workload(episodes, t_mission: float) -> float:
    """Share of mission time with at least one interaction open, in percent.

    Episodes on different channels are unioned: a single operator's time is
    never counted twice.
    """
    if t_mission <= 0:
        raise NotApplicable("mission span is not positive")
    busy = IntervalSet((e.start, e.end) for e in _flatten(episodes))
    return busy.total_duration / t_mission * 100.0


def subjective_workload_passthrough(manifest: Manifest) -> float:
    """Externally assessed workload score from the manifest (never computed here)."""
    if manifest.tlx_score is None:
        raise NotApplicable("no externally assessed workload score in manifest")
    return float(manifest.tlx_score)
