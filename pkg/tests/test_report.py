import json

import pytest

from mmms.report import (
    EvalReport,
    REPORT_JSON_SCHEMA,
    compute_timing,
    emit,
    parse_report,
)

FP = {"dataset": "abc", "predictor": "oracle", "config": "{}"}


def make_report(**overrides):
    fields = dict(
        mode="single",
        theta_iou=90.0,
        theta_avg=None,
        n_max=20,
        metrics={"NoC@90": 3.5, "NoC@80": 2.0},
        images=4,
        surfaces_total=8,
        surfaces_failed=1,
        fingerprints=dict(FP),
        timing=compute_timing(10, 1.0, 0.5),
    )
    fields.update(overrides)
    return EvalReport(**fields)


def test_json_round_trip(tmp_path):
    report = make_report()
    path = emit(report, tmp_path / "report.json")
    parsed = parse_report(path.read_text())
    assert parsed.to_dict() == report.to_dict()


def test_json_is_stable_and_sorted(tmp_path):
    report = make_report()
    a = emit(report, tmp_path / "a.json").read_text()
    b = emit(report, tmp_path / "b.json").read_text()
    assert a == b
    decoded = json.loads(a)
    assert list(decoded) == sorted(decoded)


def test_csv_row_per_metric(tmp_path):
    report = make_report()
    path = emit(report, tmp_path / "report.csv")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "metric,value"
    assert len(lines) - 1 == len(report.metrics)


def test_unknown_major_version_rejected():
    payload = make_report().to_dict()
    payload["schema_version"] = "2.0"
    with pytest.raises(ValueError):
        parse_report(json.dumps(payload))


def test_minor_version_accepted():
    payload = make_report().to_dict()
    payload["schema_version"] = "1.7"
    assert parse_report(json.dumps(payload)).schema_version == "1.7"


def test_fingerprints_required():
    with pytest.raises(ValueError):
        make_report(fingerprints={})


def test_amortized_at_least_isolated():
    timing = compute_timing(30, 2.0, 0.3)
    assert timing["amortized_ms_per_click"] >= timing["isolated_ms_per_click"]
    zero_feature = compute_timing(30, 0.0, 0.3)
    assert zero_feature["amortized_ms_per_click"] == zero_feature["isolated_ms_per_click"]


def test_schema_validates_real_report():
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(make_report().to_dict(), REPORT_JSON_SCHEMA)


def test_timing_isolated_from_metrics(tmp_path):
    a = make_report(timing=compute_timing(10, 1.0, 0.5)).to_dict()
    b = make_report(timing=compute_timing(10, 9.0, 4.0)).to_dict()
    a.pop("timing")
    b.pop("timing")
    assert a == b
