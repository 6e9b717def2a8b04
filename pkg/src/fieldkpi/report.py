"""KPI reports, the scenario/phase relevance matrix and report rendering."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Any

from . import __version__

SCHEMA = "fieldkpi.report/1"

# id, name, category, unit, direction
KPI_CATALOG = (
    ("E1", "Mapping Efficiency", "Efficiency", "m^2/m", "higher_better"),
    ("E2", "Mapping Rate", "Efficiency", "m^2/s", "higher_better"),
    ("E3", "Task Success Ratio", "Efficiency", "%", "higher_better"),
    ("E4", "Subjective Operator Workload", "Efficiency", "-", "lower_better"),
    ("E5", "Quantitative Operator Workload", "Efficiency", "%", "lower_better"),
    ("R1", "Robot Downtime", "Robustness", "%", "lower_better"),
    ("R2", "Autonomy Ratio", "Robustness", "-", "higher_better"),
    ("R3", "Time in Unscheduled Manual Operations", "Robustness", "%", "lower_better"),
    ("R4", "Retry Ratio", "Robustness", "%", "lower_better"),
    ("P1", "Science Acquisition Density", "Precision", "1/m^2", "higher_better"),
    ("P2", "Science Acquisition Distribution", "Precision", "-", "higher_better"),
    ("P3", "Localization Error", "Precision", "m", "lower_better"),
    ("P4", "Instrument Placement Error", "Precision", "m", "lower_better"),
    ("P5", "Remote Sensing Error", "Precision", "m", "lower_better"),
    ("P6", "Map Error", "Precision", "m", "lower_better"),
    ("P7", "Ratio of Identified Resources", "Precision", "%", "higher_better"),
)
KPI_IDS = tuple(row[0] for row in KPI_CATALOG)
_CATALOG = {row[0]: row for row in KPI_CATALOG}

LEVELS = ("not_relevant", "relevant", "highly_relevant")
_SYMBOL = {"highly_relevant": "●", "relevant": "◐", "not_relevant": "○"}
_ARROW = {"higher_better": "↑", "lower_better": "↓"}

# columns: s1/p1, s1/p2, s2/p1, s2/p2, s3/p1, s3/p2
# H = highly relevant, R = relevant, N = not relevant
_MATRIX_ROWS = {
    "E1": "HRHRNN",
    "E2": "HRHRNN",
    "E3": "HHHHHH",
    "E4": "HHHHHH",
    "E5": "HHHHHH",
    "R1": "RRHHNN",
    "R2": "RRHHHH",
    "R3": "RRHHHH",
    "R4": "HHHHHH",
    "P1": "RHRRRR",
    "P2": "RHRRRR",
    "P3": "HHRRRR",
    "P4": "NHNHNH",
    "P5": "HHHHHH",
    "P6": "HHRRRR",
    "P7": "RRRHRH",
}
_COLUMNS = [(s, p) for s in ("s1", "s2", "s3") for p in ("p1", "p2")]
_LEVEL_OF = {"H": "highly_relevant", "R": "relevant", "N": "not_relevant"}

RELEVANCE: dict[tuple[str, str, str], str] = {
    (s, p, kpi): _LEVEL_OF[row[c]]
    for kpi, row in _MATRIX_ROWS.items()
    for c, (s, p) in enumerate(_COLUMNS)
}


def normalize_kpi_id(kpi_id: str) -> str:
    k = kpi_id.replace(".", "").upper()
    if k not in _CATALOG:
        raise KeyError(f"unknown KPI id {kpi_id!r}")
    return k


def relevance_lookup(scenario: str, phase: str, kpi_id: str, matrix=RELEVANCE) -> str:
    """Relevance level of a KPI for a scenario and mission phase.

    Phase ``full`` takes the higher level of the two phases.
    """
    kpi = normalize_kpi_id(kpi_id)
    if phase == "full":
        levels = [relevance_lookup(scenario, p, kpi, matrix) for p in ("p1", "p2")]
        return max(levels, key=LEVELS.index)
    try:
        return matrix[(scenario, phase, kpi)]
    except KeyError:
        raise KeyError(f"no relevance entry for scenario={scenario!r}, phase={phase!r}") from None


@dataclass(frozen=True)
class KpiValue:
    kpi_id: str
    value: float | None
    reason: str | None = None
    per_robot: dict[str, float | None] | None = None
    components: dict[str, float] | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    tolerance: float | None = None
    comparison: str | None = None  # abs | le (upper bound), expected reports only
    derivation: str | None = None

    @property
    def name(self) -> str:
        return _CATALOG[self.kpi_id][1]

    @property
    def category(self) -> str:
        return _CATALOG[self.kpi_id][2]

    @property
    def unit(self) -> str:
        return _CATALOG[self.kpi_id][3]

    @property
    def direction(self) -> str:
        return _CATALOG[self.kpi_id][4]

    @property
    def applicable(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        d = {
            "id": self.kpi_id,
            "name": self.name,
            "category": self.category,
            "value": self.value,
            "unit": self.unit,
            "direction": self.direction,
            "applicable": self.applicable,
            "reason": self.reason,
            "per_robot": self.per_robot,
            "components": self.components,
            "diagnostics": self.diagnostics,
        }
        for key in ("tolerance", "comparison", "derivation"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KpiValue":
        return cls(
            kpi_id=normalize_kpi_id(d["id"]),
            value=d.get("value"),
            reason=d.get("reason"),
            per_robot=d.get("per_robot"),
            components=d.get("components"),
            diagnostics=d.get("diagnostics") or {},
            tolerance=d.get("tolerance"),
            comparison=d.get("comparison"),
            derivation=d.get("derivation"),
        )


def not_applicable(kpi_id: str, reason: str, **diagnostics) -> KpiValue:
    return KpiValue(kpi_id, None, reason=reason, diagnostics=diagnostics)


@dataclass(frozen=True)
class KpiReport:
    kpis: tuple[KpiValue, ...]
    scenario: str = "custom"
    phase: str = "full"
    config: dict[str, Any] = field(default_factory=dict)
    inputs: dict[str, Any] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    kind: str = "report"
    tool_version: str = __version__

    def __getitem__(self, kpi_id: str) -> KpiValue:
        k = normalize_kpi_id(kpi_id)
        for v in self.kpis:
            if v.kpi_id == k:
                return v
        raise KeyError(kpi_id)

    def value(self, kpi_id: str) -> float | None:
        return self[kpi_id].value

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "tool_version": self.tool_version,
            "scenario": self.scenario,
            "phase": self.phase,
            "config": self.config,
            "inputs": self.inputs,
            "notes": list(self.notes),
            "kpis": [k.to_dict() for k in self.kpis],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KpiReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            kpis=tuple(KpiValue.from_dict(k) for k in d["kpis"]),
            scenario=d.get("scenario", "custom"),
            phase=d.get("phase", "full"),
            config=d.get("config") or {},
            inputs=d.get("inputs") or {},
            notes=tuple(d.get("notes") or ()),
            kind=d.get("kind", "report"),
            tool_version=d.get("tool_version", __version__),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "KpiReport":
        return cls.from_dict(json.loads(text))


def assemble_report(values, manifest=None, *, config=None, inputs=None, notes=(), kind="report") -> KpiReport:
    """Collect KPI values into a report with all 16 slots in catalog order.

    Any KPI missing from ``values`` becomes a not-applicable slot.
    """
    by_id = {normalize_kpi_id(v.kpi_id): v for v in values}
    kpis = tuple(by_id.get(k) or not_applicable(k, "not computed") for k in KPI_IDS)
    return KpiReport(
        kpis=kpis,
        scenario=getattr(manifest, "scenario", "custom"),
        phase=getattr(manifest, "phase", "full"),
        config=dict(config or {}),
        inputs=dict(inputs or {}),
        notes=tuple(notes),
        kind=kind,
    )


# -- rendering ---------------------------------------------------------------

FORMATS = ("json", "csv", "markdown")


def _relevance(scenario, phase, kpi_id, matrix):
    if scenario not in ("s1", "s2", "s3"):
        return None
    return relevance_lookup(scenario, phase, kpi_id, matrix)


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


def select_kpis(report: KpiReport, scenario=None, phase=None, only_relevant=False, matrix=RELEVANCE):
    scenario = scenario or report.scenario
    phase = phase or report.phase
    rows = []
    for k in report.kpis:
        level = _relevance(scenario, phase, k.kpi_id, matrix)
        if only_relevant:
            if level is None:
                raise ValueError("relevance filtering needs scenario s1, s2 or s3")
            if level == "not_relevant":
                continue
        rows.append((k, level))
    return rows


def render(report: KpiReport, matrix=RELEVANCE, scenario: str | None = None, phase: str | None = None,
           fmt: str = "json", only_relevant: bool = False) -> str:
    """Render a report as JSON, CSV or a markdown table."""
    if fmt not in FORMATS:
        raise ValueError(f"unsupported format {fmt!r}; expected one of {FORMATS}")
    rows = select_kpis(report, scenario, phase, only_relevant, matrix)
    if fmt == "json":
        if only_relevant:
            report = replace(report, kpis=tuple(k for k, _ in rows))
        return report.to_json()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "category", "kpi", "value", "unit", "direction", "arrow", "relevance", "symbol"])
        for k, level in rows:
            w.writerow([k.kpi_id, k.category, k.name, _fmt(k.value), k.unit, k.direction,
                        _ARROW[k.direction], level or "", _SYMBOL.get(level, "")])
        return buf.getvalue()
    lines = [
        "| Category | KPI | Unit | Value | Relevance |",
        "|---|---|---|---|---|",
    ]
    for k, level in rows:
        label = f"{k.kpi_id[0]}.{k.kpi_id[1:]} {k.name} {_ARROW[k.direction]}"
        value = _fmt(k.value) if k.applicable else f"n/a ({k.reason})"
        rel = f"{_SYMBOL[level]} {level}" if level else "-"
        lines.append(f"| {k.category} | {label} | {k.unit} | {value} | {rel} |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Check:
    kpi_id: str
    field: str
    actual: float | None
    expected: float | None
    tolerance: float | None
    comparison: str
    ok: bool

    def __str__(self):
        status = "PASS" if self.ok else "FAIL"
        return (f"{status} {self.kpi_id}.{self.field}: actual={self.actual!r} expected={self.expected!r} "
                f"({self.comparison}, tol={self.tolerance!r})")


def _check_one(kpi_id, name, actual, expected, tol, comparison) -> Check:
    if expected is None or actual is None:
        return Check(kpi_id, name, actual, expected, tol, comparison, actual is None and expected is None)
    tol = tol or 0.0
    if comparison == "le":
        ok = actual <= expected + tol
    else:
        ok = abs(actual - expected) <= tol
    return Check(kpi_id, name, actual, expected, tol, comparison, ok)


def compare_reports(actual: KpiReport, expected: KpiReport) -> list[Check]:
    """Check every KPI of ``actual`` against an expected report with tolerances.

    Per-robot values and components present in the expectation are checked
    with the same tolerance as the headline value.
    """
    out = []
    for exp in expected.kpis:
        act = actual[exp.kpi_id]
        comp = exp.comparison or "abs"
        out.append(_check_one(exp.kpi_id, "value", act.value, exp.value, exp.tolerance, comp))
        for key, ev in (exp.per_robot or {}).items():
            av = (act.per_robot or {}).get(key)
            out.append(_check_one(exp.kpi_id, f"per_robot[{key}]", av, ev, exp.tolerance, comp))
        for key, ev in (exp.components or {}).items():
            av = (act.components or {}).get(key)
            out.append(_check_one(exp.kpi_id, key, av, ev, exp.tolerance, comp))
    return out
