"""KPI computation and mission simulation for multi-robot planetary field trials."""

__version__ = "0.1.0"

from .telemetry import (
    Event,
    Manifest,
    MissionLog,
    LogFormatError,
    load_mission,
    parse_log,
    validate_log,
    extract_streams,
)
from .timeline import Interval, IntervalSet, build_timeline, interaction_episodes
from .analysis import analyze_mission
from .report import KpiReport, KpiValue, relevance_lookup, render
from .simulator import ScenarioConfig, generate, expected_report, preset

__all__ = [
    "Event",
    "Manifest",
    "MissionLog",
    "LogFormatError",
    "load_mission",
    "parse_log",
    "validate_log",
    "extract_streams",
    "Interval",
    "IntervalSet",
    "build_timeline",
    "interaction_episodes",
    "analyze_mission",
    "KpiReport",
    "KpiValue",
    "relevance_lookup",
    "render",
    "ScenarioConfig",
    "generate",
    "expected_report",
    "preset",
]
