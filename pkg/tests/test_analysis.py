import json

import pytest

from conftest import ev, make_log, write_jsonl
from fieldkpi.analysis import AnalysisOptions, InvalidLogError, analyze_log, analyze_mission
from fieldkpi.report import KPI_IDS


def _tiny_records():
    return [
        ev(0, "mission_start"),
        ev(0, "robot_state", "a", state="active"),
        ev(0, "pose", "a", x=0, y=0, z=0),
        ev(10, "pose", "a", x=3, y=4, z=0),
        ev(10, "robot_state", "a", state="idle"),
        ev(20, "mission_end"),
    ]


def test_report_has_every_slot_even_without_inputs():
    rep = analyze_log(make_log(_tiny_records()))
    assert [k.kpi_id for k in rep.kpis] == list(KPI_IDS)
    assert rep["E1"].reason == "no map cloud"
    assert rep.value("R1") == 50.0
    assert rep.value("R2") == 1.0


def test_missing_ground_truth_map(tmp_path):
    events = write_jsonl(tmp_path / "events.jsonl", _tiny_records())
    (tmp_path / "map.xyz").write_text("0.1 0.1 0\n1.1 0.1 0\n")
    (tmp_path / "mission.json").write_text(json.dumps({"events": events.name, "map_cloud": "map.xyz"}))
    rep = analyze_mission(tmp_path / "mission.json", AnalysisOptions(cell_size=1.0))
    assert rep["P6"].reason == "no ground-truth map"
    assert rep.value("E1") == pytest.approx(2.0 / 5.0)
    assert rep.value("E2") == pytest.approx(2.0 / 20.0)
    assert rep["E1"].diagnostics["distance_source"] == {"a": "estimated"}
    assert rep.inputs["events"]["digest"].startswith("sha256:")


def test_empty_measurement_set_disables_density_and_distribution():
    rep = analyze_log(make_log(_tiny_records()))
    assert not rep["P1"].applicable and not rep["P2"].applicable


def test_invalid_log_is_refused():
    recs = _tiny_records()
    recs[3]["t"] = -1
    with pytest.raises(InvalidLogError) as info:
        analyze_mission(make_log(recs))
    assert {v.code for v in info.value.violations} >= {"non_monotonic_time", "negative_time"}


def test_options_are_checked_and_echoed():
    with pytest.raises(ValueError):
        AnalysisOptions(cell_size=0)
    with pytest.raises(ValueError):
        AnalysisOptions(ate_align="similarity")
    rep = analyze_log(make_log(_tiny_records()), AnalysisOptions(match_radius=2.5, ate_align="none"))
    assert rep.config["match_radius"] == 2.5
    assert rep.config["ate_align"] == "none"


def test_scenario_and_phase_override(bundles):
    rep = analyze_mission(bundles["custom_noiseless"], scenario="s3", phase="p2")
    assert (rep.scenario, rep.phase) == ("s3", "p2")


def test_collinear_track_falls_back_to_translation(tmp_path):
    recs = [ev(0, "mission_start")] + [ev(t, "pose", "a", x=t, y=0, z=0) for t in range(5)] + [ev(9, "mission_end")]
    events = write_jsonl(tmp_path / "events.jsonl", recs)
    (tmp_path / "gt.csv").write_text("t,x,y,z\n" + "".join(f"{t},{t + 0.5},0,0\n" for t in range(5)))
    (tmp_path / "mission.json").write_text(json.dumps({"events": events.name, "gt_trajectories": {"a": "gt.csv"}}))
    rep = analyze_mission(tmp_path / "mission.json")
    assert rep.value("P3") == pytest.approx(0.0, abs=1e-12)
    assert rep["P3"].diagnostics["robots"]["a"]["align"] == "translation"
    assert any("translation" in n for n in rep.notes)


def test_never_started_tasks_are_noted():
    recs = _tiny_records()
    recs.insert(1, ev(0, "task_assigned", None, task_id="X", task_type="m"))
    rep = analyze_log(make_log(recs))
    assert rep.value("E3") == 0.0
    assert rep["E3"].diagnostics["never_started"] == ["X"]
    assert any("never started" in n for n in rep.notes)


def test_area_source_convex_hull(bundles):
    rep = analyze_mission(bundles["custom_noiseless"], AnalysisOptions(area_source="convex_hull"))
    # 3x2 lattice at 20 m spacing: hull 40 x 20 m, nearest neighbours 20 m apart
    assert rep["P2"].diagnostics["area_m2"] == pytest.approx(800.0)
    assert rep.value("P2") == pytest.approx(20.0 * 2 * (6 / 800.0) ** 0.5)
