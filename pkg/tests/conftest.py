"""Shared fixtures: tiny hand-built logs and simulated mission bundles."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from fieldkpi.simulator import (
    Interaction,
    RobotSpec,
    ScenarioConfig,
    TaskFailure,
    Window,
    generate,
    preset,
    write_bundle,
)
from fieldkpi.telemetry import Manifest, MissionLog, RobotInfo, event_from_dict


def ev(t, type, robot=None, **payload):
    """Event record as it would appear on one log line."""
    return {"t": t, "robot": robot, "type": type, **payload}


def make_log(records, robots=(), **manifest) -> MissionLog:
    events = tuple(event_from_dict(r, n) for n, r in enumerate(records, start=1))
    roster = tuple(RobotInfo(r, "scout") for r in robots)
    return MissionLog(events, Manifest(robots=roster, **manifest))


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


# Small configurations that simulate in well under a second. Together with the
# three presets they form the oracle round-trip suite.
def custom_noiseless() -> ScenarioConfig:
    """One scout and one scientist, no pose noise, exactly 300 s of interaction in 1000 s."""
    return ScenarioConfig(
        scenario="custom", seed=7,
        robots=(RobotSpec("scout", "scout", 1.0, 10.0), RobotSpec("sci", "scientist", 1.0)),
        area_size=(40.0, 20.0), sampling_interval=20.0,
        setup_duration=100.0, phase1_duration=400.0, phase2_duration=500.0,
        pose_period=1.0, measurement_duration=20.0,
        interactions=(Interaction("scout", 150.0, 100.0), Interaction(None, 200.0, 100.0),
                      Interaction("sci", 700.0, 150.0)),
        n_resources=3, detection_dropout=("R002",),
        placement_offsets=(0.1, 0.2, 0.4), remote_target_offsets=(3.0, 4.0),
    )


def custom_mixed() -> ScenarioConfig:
    """Two scouts, two scientists, failures, manual and downtime windows, noise."""
    return ScenarioConfig(
        scenario="custom", seed=1234,
        robots=(RobotSpec("a", "scout", 0.8, 5.0), RobotSpec("b", "scout", 0.8, 5.0),
                RobotSpec("c", "scientist", 0.5), RobotSpec("d", "scientist", 0.5)),
        area_origin=(10.0, -20.0), area_size=(60.0, 40.0), sampling_interval=20.0,
        setup_duration=200.0, phase1_duration=1000.0, phase2_duration=1500.0,
        pose_period=2.0, measurement_duration=30.0, terrain_slope_deg=2.0,
        interactions=(Interaction("a", 300.0, 20.0), Interaction("c", 1500.0, 0.0),
                      Interaction("d", 1800.0, 60.0), Interaction(None, 1810.0, 30.0)),
        task_failures=(TaskFailure("site_002", 2), TaskFailure("site_005", 1, completes=False)),
        unscheduled_manual=(Window("b", 500.0, 50.0),),
        scheduled_manual=(Window("c", 2000.0, 40.0),),
        downtime=(Window("a", 700.0, 30.0, "fault"), Window("d", 1300.0, 100.0, "idle")),
        pose_noise_sigma=0.01, n_resources=6, detection_dropout=("R001",), false_detections=1,
        placement_offsets=(0.05,), remote_target_offsets=(0.5, 0.0),
        map_offset_z=0.1, tlx_score=20.0,
    )


ROUND_TRIP_CONFIGS = {
    "s1": lambda: preset("s1", 42),
    "s2": lambda: preset("s2", 42),
    "s3": lambda: preset("s3", 42),
    "custom_noiseless": custom_noiseless,
    "custom_mixed": custom_mixed,
}


@pytest.fixture(scope="session")
def bundles(tmp_path_factory):
    """Simulated bundles keyed by config name; each maps to its mission.json path."""
    root = tmp_path_factory.mktemp("bundles")
    out = {}
    for name, make in ROUND_TRIP_CONFIGS.items():
        out[name] = write_bundle(generate(make()), root / name)
    return out


# Filled in by the acceptance tests, one line per criterion, and printed after the run.
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])


@pytest.fixture(scope="session")
def analyzed(bundles):
    """Default-option reports for every simulated bundle, keyed like ``bundles``."""
    from fieldkpi.analysis import analyze_mission

    return {name: analyze_mission(path) for name, path in bundles.items()}
