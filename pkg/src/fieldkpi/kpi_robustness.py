"""Robustness KPIs: downtime, autonomy ratio, unscheduled manual time, retries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import NotApplicable
from .kpi_efficiency import TaskStats
from .timeline import Episode, RobotTimeline, neglect_intervals


def team_mean(per_robot: Mapping[str, float]) -> float:
    """Unweighted mean over robots."""
    if not per_robot:
        raise NotApplicable("no robots")
    return sum(per_robot.values()) / len(per_robot)


def downtime_intervals(timeline: RobotTimeline, count_scheduled_waits_as_idle: bool = True):
    down = timeline.state_intervals["idle"] | timeline.state_intervals["fault"]
    if not count_scheduled_waits_as_idle:
        down = down - timeline.scheduled_idle
    return down


def robot_downtime(timeline: RobotTimeline, count_scheduled_waits_as_idle: bool = True) -> float:
    """Percent of mission time spent idle or in fault.

    Manual operation is not downtime. With ``count_scheduled_waits_as_idle``
    off, idle stretches entered with ``scheduled=true`` are excluded.
    """
    if timeline.t_mission <= 0:
        raise NotApplicable("mission span is not positive")
    down = downtime_intervals(timeline, count_scheduled_waits_as_idle)
    return down.total_duration / timeline.t_mission * 100.0


@dataclass(frozen=True)
class AutonomyStats:
    t_ie_mean: float
    t_nt_mean: float
    rad: float
    autonomy_ratio: float
    n_episodes: int
    n_neglect: int


def autonomy_ratio(timeline: RobotTimeline, episodes: Iterable[Episode]) -> AutonomyStats:
    """Robot attention demand from mean interaction effort and mean neglect tolerance.

    Interaction effort is the mean episode duration on the robot's channel,
    neglect tolerance the mean length of the maximal active stretches left
    after removing those episodes.
    """
    episodes = list(episodes)
    neglect = list(neglect_intervals(timeline, episodes))
    t_ie = sum(e.duration for e in episodes) / len(episodes) if episodes else 0.0
    t_nt = sum(iv.duration for iv in neglect) / len(neglect) if neglect else 0.0
    if not episodes:
        rad = 0.0
    elif t_ie + t_nt == 0:
        # only zero-length interventions on a robot that was never productive
        rad = 1.0
    else:
        rad = t_ie / (t_ie + t_nt)
    return AutonomyStats(t_ie, t_nt, rad, 1.0 - rad, len(episodes), len(neglect))


def unscheduled_manual_time(timeline: RobotTimeline) -> float:
    if timeline.t_mission <= 0:
        raise NotApplicable("mission span is not positive")
    return timeline.unscheduled_manual.total_duration / timeline.t_mission * 100.0


def retry_ratio(stats: TaskStats) -> float:
    if stats.n_attempts == 0:
        raise NotApplicable("no task attempts")
    return (stats.n_attempts - stats.n_success) / stats.n_attempts * 100.0
