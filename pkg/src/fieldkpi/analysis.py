"""End-to-end analysis: mission manifest in, KPI report out."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kpi_efficiency as eff
from . import kpi_precision as prec
from . import kpi_robustness as rob
from .errors import NotApplicable
from .geometry import DEFAULT_CELL_SIZE, DEFAULT_MAX_DT, GeometryError, hull_area, mapped_area
from .report import KpiReport, KpiValue, assemble_report, not_applicable
from .telemetry import (
    MissionLog,
    Violation,
    extract_streams,
    load_mission,
    parse_log,
    read_cloud,
    read_gt_resources,
    read_gt_targets,
    read_trajectory,
    validate_log,
)
from .timeline import build_timeline, interaction_episodes

log = logging.getLogger(__name__)


class InvalidLogError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__(f"log failed validation with {len(violations)} violation(s)")


@dataclass(frozen=True)
class AnalysisOptions:
    cell_size: float = DEFAULT_CELL_SIZE
    match_radius: float = prec.DEFAULT_MATCH_RADIUS
    max_dt: float = DEFAULT_MAX_DT
    ate_align: str = "rigid"
    area_source: str = "mapped_area"

    def __post_init__(self):
        for name in ("cell_size", "match_radius", "max_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ate_align not in ("none", "translation", "rigid"):
            raise ValueError(f"unknown ate_align {self.ate_align!r}")
        if self.area_source not in prec.AREA_SOURCES:
            raise ValueError(f"unknown area_source {self.area_source!r}")


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _input_digests(mission: MissionLog, manifest_path: Path | None) -> dict:
    m = mission.manifest
    out = {}
    if manifest_path is not None:
        out["manifest"] = {"path": manifest_path.name, "digest": file_digest(manifest_path)}
    for key in ("events", "map_cloud", "gt_map", "gt_resources", "gt_targets"):
        p = m.resolve(key)
        if p is not None and p.exists():
            out[key] = {"path": getattr(m, key), "digest": file_digest(p)}
    for robot in sorted(m.gt_trajectories):
        p = m.resolve_trajectory(robot)
        if p is not None and p.exists():
            out[f"gt_traj_{robot}"] = {"path": m.gt_trajectories[robot], "digest": file_digest(p)}
    return out


def _optional_file(manifest, key, reader, missing_reason):
    p = manifest.resolve(key)
    if p is None:
        raise NotApplicable(missing_reason)
    if not p.exists():
        raise NotApplicable(f"{missing_reason} ({getattr(manifest, key)} not found)")
    return reader(p)


def _kpi(kpi_id, fn):
    """Evaluate ``fn`` and wrap its result, or a not-applicable reason, as a KpiValue."""
    try:
        out = fn()
    except NotApplicable as exc:
        return not_applicable(kpi_id, exc.reason)
    if isinstance(out, KpiValue):
        return out
    return KpiValue(kpi_id, float(out))


def analyze_mission(source, options: AnalysisOptions | None = None, *, scenario: str | None = None,
                    phase: str | None = None) -> KpiReport:
    """Validate a mission and compute all 16 KPIs.

    ``source`` is a path to ``mission.json`` (or a bare event log) or an
    already parsed MissionLog. Raises InvalidLogError if validation fails.
    """
    options = options or AnalysisOptions()
    manifest_path = None
    if isinstance(source, MissionLog):
        mission = source
    else:
        path = Path(source)
        mission = load_mission(path) if path.suffix == ".json" else parse_log(path)
        manifest_path = path if path.suffix == ".json" else None
    violations = validate_log(mission)
    if violations:
        raise InvalidLogError(violations)
    report = analyze_log(mission, options)
    inputs = _input_digests(mission, manifest_path)
    return KpiReport(
        kpis=report.kpis,
        scenario=scenario or report.scenario,
        phase=phase or report.phase,
        config=report.config,
        inputs=inputs,
        notes=report.notes,
    )


def analyze_log(mission: MissionLog, options: AnalysisOptions | None = None) -> KpiReport:
    options = options or AnalysisOptions()
    m = mission.manifest
    span = mission.span
    t_mission = mission.t_mission
    streams = extract_streams(mission)
    robots = list(streams.robots)
    timelines = {r: build_timeline(streams.robots[r], span, r) for r in robots}
    episodes = interaction_episodes(streams.operator, span)
    notes: list[str] = []
    values: list[KpiValue] = []

    unterminated = [e for eps in episodes.values() for e in eps if e.unterminated]
    if unterminated:
        notes.append(f"{len(unterminated)} interaction episode(s) closed at mission end")

    # -- inputs shared by several KPIs
    coverage = None
    coverage_reason = None
    try:
        cloud = _optional_file(m, "map_cloud", read_cloud, "no map cloud")
        coverage = mapped_area(cloud, options.cell_size)
    except NotApplicable as exc:
        cloud = None
        coverage_reason = exc.reason

    gt_traj = {}
    for r in robots:
        p = m.resolve_trajectory(r)
        if p is not None and p.exists():
            gt_traj[r] = read_trajectory(p)
    est_traj = {r: streams.robots[r].trajectory() for r in robots}

    # -- efficiency
    def e1():
        if coverage is None:
            raise NotApplicable(coverage_reason)
        paths, source = {}, {}
        for r in robots:
            use_gt = r in gt_traj and len(gt_traj[r]) > 0
            paths[r] = gt_traj[r] if use_gt else est_traj[r]
            source[r] = "ground_truth" if use_gt else "estimated"
        d_tot = eff.total_distance(paths)
        value = eff.mapping_efficiency(coverage, paths)
        return KpiValue("E1", value, diagnostics={
            "area_m2": coverage.area, "cell_size": coverage.cell_size,
            "occupied_cells": coverage.occupied_cell_count, "d_tot_m": d_tot, "distance_source": source,
        })

    def e2():
        if coverage is None:
            raise NotApplicable(coverage_reason)
        return KpiValue("E2", eff.mapping_rate(coverage, t_mission),
                        diagnostics={"area_m2": coverage.area, "t_mission_s": t_mission})

    all_attempts = [a for tl in timelines.values() for a in tl.task_episodes]
    stats = eff.task_stats(streams.all_tasks(), all_attempts)

    def e3():
        v = eff.task_success_ratio(stats)
        diag = {"n_total": stats.n_total, "n_completed": stats.n_completed}
        if stats.never_started:
            diag["never_started"] = list(stats.never_started)
            notes.append(f"{len(stats.never_started)} assigned task(s) never started; counted in N_total")
        return KpiValue("E3", v, diagnostics=diag)

    def e4():
        return KpiValue("E4", eff.subjective_workload_passthrough(m), diagnostics={"source": "externally assessed"})

    def e5():
        v = eff.quantitative_operator_workload(episodes, t_mission)
        n = sum(len(e) for e in episodes.values())
        return KpiValue("E5", v, diagnostics={"episodes": n, "t_mission_s": t_mission})

    values += [_kpi("E1", e1), _kpi("E2", e2), _kpi("E3", e3), _kpi("E4", e4), _kpi("E5", e5)]

    # -- robustness
    def per_robot_kpi(kpi_id, fn, diag=None):
        if not robots:
            raise NotApplicable("no robots in mission")
        per = {r: fn(timelines[r]) for r in robots}
        return KpiValue(kpi_id, rob.team_mean(per), per_robot=per, diagnostics={"aggregation": "mean", **(diag or {})})

    waits = m.count_scheduled_waits_as_idle
    values.append(_kpi("R1", lambda: per_robot_kpi(
        "R1", lambda tl: rob.robot_downtime(tl, waits), {"count_scheduled_waits_as_idle": waits})))

    def r2():
        if not robots:
            raise NotApplicable("no robots in mission")
        stats_r = {r: rob.autonomy_ratio(timelines[r], episodes.get(r, [])) for r in robots}
        per = {r: s.autonomy_ratio for r, s in stats_r.items()}
        diag = {"aggregation": "mean",
                "rad": {r: s.rad for r, s in stats_r.items()},
                "t_ie_mean_s": {r: s.t_ie_mean for r, s in stats_r.items()},
                "t_nt_mean_s": {r: s.t_nt_mean for r, s in stats_r.items()},
                "team_channel_episodes": len(episodes.get(None, []))}
        return KpiValue("R2", rob.team_mean(per), per_robot=per, diagnostics=diag)

    values.append(_kpi("R2", r2))
    values.append(_kpi("R3", lambda: per_robot_kpi("R3", rob.unscheduled_manual_time)))

    def r4():
        v = rob.retry_ratio(stats)
        return KpiValue("R4", v, diagnostics={"n_attempts": stats.n_attempts, "n_success": stats.n_success})

    values.append(_kpi("R4", r4))

    # -- precision
    measurements = [ev for r in robots for ev in streams.robots[r].measurements]
    valid_xyz = np.array([ev.xyz for ev in measurements if ev["valid"]], dtype=float).reshape(-1, 3)

    def p1():
        if coverage is None:
            raise NotApplicable(coverage_reason)
        if not measurements:
            raise NotApplicable("no measurements")
        v = prec.science_acquisition_density(measurements, coverage)
        return KpiValue("P1", v, diagnostics={"n_valid": len(valid_xyz), "area_m2": coverage.area})

    def p2():
        if len(valid_xyz) < 2:
            raise NotApplicable("fewer than 2 valid measurements")
        if options.area_source == "mapped_area":
            if coverage is None:
                raise NotApplicable(coverage_reason)
            area = coverage.area
        else:
            try:
                area = hull_area(valid_xyz)
            except GeometryError as exc:
                raise NotApplicable(str(exc)) from exc
        ce = prec.clark_evans(valid_xyz, area, options.area_source)
        return KpiValue("P2", ce.r, diagnostics={
            "n": ce.n, "intensity_per_m2": ce.intensity, "d_obs_m": ce.d_obs, "d_exp_m": ce.d_exp,
            "area_m2": ce.area, "area_source": ce.area_source, "edge_correction": None,
        })

    def p3():
        if not gt_traj:
            raise NotApplicable("no ground-truth trajectories")
        per, diag = {}, {}
        sq, n = 0.0, 0
        for r in robots:
            if r not in gt_traj or len(est_traj[r]) == 0:
                continue
            mode = options.ate_align
            try:
                res = prec.localization_error(est_traj[r], gt_traj[r], mode, options.max_dt)
            except GeometryError as exc:
                log.warning("robot %s: %s; falling back to translation alignment", r, exc)
                notes.append(f"P3 {r}: {exc}; used translation alignment")
                res = prec.localization_error(est_traj[r], gt_traj[r], "translation", options.max_dt)
            except NotApplicable as exc:
                diag[r] = {"error": exc.reason}
                continue
            per[r] = res.rmse
            diag[r] = {"matched": res.matched, "dropped": res.dropped, "align": res.mode,
                       "rotation": res.alignment.rotation.tolist(),
                       "translation": res.alignment.translation.tolist()}
            sq += float(np.sum(res.residuals ** 2))
            n += len(res.residuals)
        if n == 0:
            raise NotApplicable("no estimated pose associated with ground truth")
        return KpiValue("P3", math.sqrt(sq / n), per_robot=per,
                        diagnostics={"aggregation": "pooled_rmse", "max_dt": options.max_dt,
                                     "align": options.ate_align, "robots": diag})

    def p4():
        placements = [ev for r in robots for ev in streams.robots[r].placements]
        pe = prec.instrument_placement_error(placements)
        return KpiValue("P4", pe.median, components={"median": pe.median, "rmse": pe.rmse},
                        diagnostics={"n": pe.n, "value_is": "median"})

    def p5():
        gt_t = _optional_file(m, "gt_targets", read_gt_targets, "no ground-truth targets")
        remote = [ev for r in robots for ev in streams.robots[r].remote_targets]
        rs = prec.remote_sensing_error(remote, gt_t)
        return KpiValue("P5", rs.rmse, diagnostics={"n_matched": rs.n_matched,
                                                    "unmatched_remote_ids": rs.unmatched_remote,
                                                    "unmatched_gt_ids": rs.unmatched_gt})

    def p6():
        if cloud is None:
            raise NotApplicable(coverage_reason)
        gt_map = _optional_file(m, "gt_map", read_cloud, "no ground-truth map")
        return KpiValue("P6", prec.map_error(cloud, gt_map),
                        diagnostics={"variant": "chamfer_mean_unsquared", "n_map": len(cloud), "n_gt": len(gt_map)})

    def p7():
        gt_res = _optional_file(m, "gt_resources", read_gt_resources, "no ground-truth resources")
        det = np.array([ev.xyz for r in robots for ev in streams.robots[r].detections], dtype=float).reshape(-1, 3)
        gt_xyz = np.array([g.xyz for g in gt_res], dtype=float).reshape(-1, 3)
        v, match = prec.identified_resources_ratio(det, gt_xyz, options.match_radius)
        return KpiValue("P7", v, diagnostics={
            "match_radius": match.match_radius, "n_gt": match.n_gt, "n_matched": match.n_matched,
            "unmatched_detections": len(match.unmatched_detections),
            "missed_ids": [gt_res[j].id for j in match.unmatched_gt],
        })

    for kid, fn in (("P1", p1), ("P2", p2), ("P3", p3), ("P4", p4), ("P5", p5), ("P6", p6), ("P7", p7)):
        values.append(_kpi(kid, fn))

    config = {
        "cell_size": options.cell_size,
        "match_radius": options.match_radius,
        "max_dt": options.max_dt,
        "ate_align": options.ate_align,
        "area_source": options.area_source,
        "count_scheduled_waits_as_idle": waits,
        "t_mission_s": t_mission,
        "robots": robots,
    }
    return assemble_report(values, m, config=config, notes=notes)
