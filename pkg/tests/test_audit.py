import json
from dataclasses import replace

import pytest

from depthaudit.audit import AuditVerdict, IssueClass, audit_report, classify
from depthaudit.errors import EmptyReport
from depthaudit.metadata import SessionPair, fixture_database, lookup_pair


def test_five_gen_is_wrong_focal_with_recommendations():
    v = classify(lookup_pair("iPad 12.9'' 5gen", "iOS14"))
    assert v.issue is IssueClass.WRONG_FOCAL
    assert v.recommended_focal_av == pytest.approx(525.97, abs=0.01)
    assert v.recommended_focal_ar == pytest.approx(361.58, abs=0.01)
    # both signals fire; focal wins and the note says so
    assert any("precedence" in n for n in v.notes)


def test_four_gen_is_zoom():
    v = classify(lookup_pair("iPad 12.9'' 4gen V2"))
    assert v.issue is IssueClass.ZOOM_MISALIGNMENT
    assert v.recommended_zoom[0] == pytest.approx(0.9507, abs=5e-4)
    assert v.recommended_focal_av is None


def test_iphone_is_healthy():
    v = classify(lookup_pair("iPhone 11 Pro", "iOS15"))
    assert v.issue is IssueClass.HEALTHY and not v.has_issue


def test_thresholds_are_configurable():
    pair = lookup_pair("iPad 12.9'' 4gen V1")
    assert classify(pair, ird_threshold=10.0).issue is IssueClass.HEALTHY


def test_threshold_edge():
    pair = lookup_pair("iPhone 11 Pro", "iOS14")
    ar = pair.ar
    bumped = replace(ar, depth_intrinsics_unscaled=ar.depth_intrinsics_unscaled.with_focal(pair.av.depth_f * 1.0099))
    assert classify(SessionPair(pair.av, bumped)).issue is IssueClass.HEALTHY
    bumped = replace(ar, depth_intrinsics_unscaled=ar.depth_intrinsics_unscaled.with_focal(pair.av.depth_f * 1.0101))
    assert classify(SessionPair(pair.av, bumped)).issue is IssueClass.WRONG_FOCAL


def test_verdict_consistency_enforced():
    with pytest.raises(ValueError):
        AuditVerdict("d", "o", IssueClass.HEALTHY, 0.0, 0.0, recommended_zoom=(1.0, 1.0))
    with pytest.raises(ValueError):
        AuditVerdict("d", "o", IssueClass.WRONG_FOCAL, 8.0, 0.0)


def test_report_schema_and_text():
    report = audit_report(classify(p) for p in fixture_database())
    doc = json.loads(report.to_json())
    assert doc["schema_version"] == 1
    assert doc["counts"] == {"Healthy": 2, "ZoomMisalignment": 4, "WrongFocal": 4}
    assert doc["recommendations"] == 8
    assert report.has_issues
    assert report.to_text().splitlines()[-1].startswith("summary:")
    with pytest.raises(EmptyReport):
        audit_report([])
