import csv
import io
import json
from pathlib import Path

import pytest

from fieldkpi.report import (
    KPI_CATALOG,
    KPI_IDS,
    RELEVANCE,
    KpiReport,
    KpiValue,
    assemble_report,
    compare_reports,
    not_applicable,
    relevance_lookup,
    render,
)
from fieldkpi.telemetry import Manifest

DATA = Path(__file__).parent / "data"
SYMBOL_LEVEL = {"●": "highly_relevant", "◐": "relevant", "○": "not_relevant"}


def transcribed_matrix():
    """Relevance grid transcribed by hand into tests/data, keyed like the library matrix."""
    with open(DATA / "relevance_matrix.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for row in rows:
        for col in ("s1p1", "s1p2", "s2p1", "s2p2", "s3p1", "s3p2"):
            out[(col[:2], col[2:], row["kpi"].replace(".", ""))] = SYMBOL_LEVEL[row[col]]
    return out


def sample_report(**kw):
    values = [KpiValue("E1", 2.5, diagnostics={"cell_size": 0.25}),
              KpiValue("R1", 12.0, per_robot={"a": 10.0, "b": 14.0}),
              KpiValue("P4", 0.2, components={"median": 0.2, "rmse": 0.26}),
              not_applicable("P6", "no ground-truth map")]
    return assemble_report(values, Manifest(scenario="s1", phase="p1"), config={"cell_size": 0.25}, **kw)


# -- relevance matrix ----------------------------------------------------------

def test_matrix_matches_transcription_on_all_entries():
    expected = transcribed_matrix()
    assert len(expected) == len(RELEVANCE) == 96
    for key, level in expected.items():
        assert relevance_lookup(*key) == level, key


@pytest.mark.parametrize("key, level", [
    (("s1", "p1", "E1"), "highly_relevant"),
    (("s3", "p1", "E1"), "not_relevant"),
    (("s2", "p1", "P4"), "not_relevant"),
    (("s2", "p2", "P7"), "highly_relevant"),
])
def test_relevance_examples(key, level):
    assert relevance_lookup(*key) == level


def test_dotted_ids_are_accepted():
    assert relevance_lookup("s1", "p2", "P.4") == "highly_relevant"


def test_full_phase_takes_the_higher_level():
    assert relevance_lookup("s1", "full", "P4") == "highly_relevant"
    assert relevance_lookup("s1", "full", "E1") == "highly_relevant"
    assert relevance_lookup("s3", "full", "R1") == "not_relevant"


@pytest.mark.parametrize("key", [("s4", "p1", "E1"), ("s1", "p3", "E1"), ("s1", "p1", "E6")])
def test_unknown_keys_raise(key):
    with pytest.raises(KeyError):
        relevance_lookup(*key)


def test_direction_flags():
    higher = {k for k, _, _, _, d in KPI_CATALOG if d == "higher_better"}
    assert higher == {"E1", "E2", "E3", "R2", "P1", "P2", "P7"}
    assert len(KPI_CATALOG) == 16


# -- report assembly and serialisation -------------------------------------------

def test_assembled_report_has_all_slots():
    r = sample_report()
    assert [k.kpi_id for k in r.kpis] == list(KPI_IDS)
    assert r["P6"].reason == "no ground-truth map"
    assert not r["E3"].applicable


def test_json_round_trip():
    r = sample_report(notes=("rigid alignment fell back to translation",))
    assert KpiReport.from_json(r.to_json()) == r
    assert KpiReport.from_json(render(r, fmt="json")) == r


def test_json_is_strict():
    r = assemble_report([KpiValue("E1", float("nan"))])
    with pytest.raises(ValueError):
        r.to_json()


def test_unknown_schema_rejected():
    d = sample_report().to_dict()
    d["schema"] = "other/9"
    with pytest.raises(ValueError):
        KpiReport.from_dict(d)


def test_csv_has_one_row_per_kpi():
    rows = list(csv.reader(io.StringIO(render(sample_report(), fmt="csv"))))
    assert len(rows) == 17
    assert rows[0][:4] == ["id", "category", "kpi", "value"]
    e1 = rows[1]
    assert e1[0] == "E1" and e1[3] == "2.5" and e1[6] == "↑" and e1[8] == "●"


def test_csv_uses_six_significant_digits():
    r = assemble_report([KpiValue("E1", 3.14159265358979)], Manifest(scenario="s1", phase="p1"))
    row = list(csv.reader(io.StringIO(render(r, fmt="csv"))))[1]
    assert row[3] == "3.14159"


def test_markdown_only_relevant_drops_p4_for_s1_p1():
    md = render(sample_report(), fmt="markdown", only_relevant=True)
    assert "Instrument Placement Error" not in md
    assert "Mapping Efficiency" in md
    full = render(sample_report(), fmt="markdown")
    assert "Instrument Placement Error" in full
    assert full.count("\n") == 18


def test_only_relevant_json_keeps_relevant_subset():
    doc = json.loads(render(sample_report(), fmt="json", only_relevant=True))
    assert "P4" not in [k["id"] for k in doc["kpis"]]


def test_only_relevant_needs_a_named_scenario():
    r = assemble_report([])
    with pytest.raises(ValueError):
        render(r, fmt="csv", only_relevant=True)


def test_unsupported_format():
    with pytest.raises(ValueError):
        render(sample_report(), fmt="xml")


def test_compare_reports_uses_upper_bounds():
    exp = assemble_report([KpiValue("P3", 0.03, tolerance=0.03, comparison="le")], kind="expected")
    ok = assemble_report([KpiValue("P3", 0.05)])
    bad = assemble_report([KpiValue("P3", 0.07)])
    p3 = lambda checks: [c for c in checks if c.kpi_id == "P3"][0]
    assert p3(compare_reports(ok, exp)).ok
    assert not p3(compare_reports(bad, exp)).ok
