import json

import numpy as np
import pytest
from click.testing import CliRunner

from depthaudit.bench import SceneSpec, frontal_pose, hemisphere_poses, generate_dataset
from depthaudit.bundle import CaptureBundle, save_bundle
from depthaudit.camera import DepthMap, Intrinsics
from depthaudit.cli import cli
from depthaudit.formats import decode_ply, read_depth
from depthaudit.metadata import fixtures_dir, load_meta, lookup

FIX = fixtures_dir()
FIVE = ["--av", str(FIX / "ipad129_5gen_av_ios14.json"), "--ar", str(FIX / "ipad129_5gen_arkit_ios14.json")]
IPHONE = ["--av", str(FIX / "iphone11pro_av_ios14.json"), "--ar", str(FIX / "iphone11pro_arkit_ios14.json")]


def meta_flags(pair):
    return ["--av-meta", pair[1], "--ar-meta", pair[3]]


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, [str(a) for a in args])

    return invoke


def scene_file(tmp_path, **overrides):
    doc = {
        "seed": 1,
        "board": {"cols": 9, "rows": 6, "square_size": 0.02},
        "intrinsics": {"f": 565.85, "cx": 319.5, "cy": 239.5},
        "poses": [{"rvec": [0.0, 0.0, 0.0], "t": [0.0, 0.0, 0.25]}],
    }
    doc.update(overrides)
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    return path


def test_help_for_every_command(run):
    for cmd in ("audit", "fix-depth", "fix-intrinsics", "unproject", "verify-depth", "calibrate", "simulate"):
        res = run(cmd, "--help")
        assert res.exit_code == 0 and "Usage" in res.output


def test_audit_exit_codes(run, tmp_path):
    assert run("audit", *IPHONE).exit_code == 0
    res = run("audit", *FIVE, "--report", tmp_path / "r.json")
    assert res.exit_code == 2 and "WrongFocal" in res.output and "525.97" in res.output
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["schema_version"] == 1
    bad = tmp_path / "bad.json"
    bad.write_text((FIX / "iphone11pro_av_ios14.json").read_text()[:80])
    res = run("audit", "--av", bad, "--ar", IPHONE[3])
    assert res.exit_code == 1 and "error" in res.output
    assert run("audit").exit_code == 1


def test_audit_field_level_message(run, tmp_path):
    doc = json.loads((FIX / "iphone11pro_av_ios14.json").read_text())
    del doc["intrinsic_reference_dimensions"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    res = run("audit", "--av", path, "--ar", IPHONE[3])
    assert res.exit_code == 1 and "intrinsic_reference_dimensions" in res.output


def test_audit_fixture_env(run, tmp_path, monkeypatch):
    for name in ("iphone11pro_av_ios14.json", "iphone11pro_arkit_ios14.json"):
        (tmp_path / name).write_text((FIX / name).read_text())
    monkeypatch.setenv("DEPTHAUDIT_FIXTURES", str(tmp_path))
    res = run("audit", "--fixtures")
    assert res.exit_code == 0 and res.output.count("Healthy") == 2


def test_fix_intrinsics(run, tmp_path):
    res = run("fix-intrinsics", *meta_flags(FIVE), "--session", "av", "--out", tmp_path / "av.json")
    assert res.exit_code == 0 and "525.97" in res.output
    fixed = load_meta(tmp_path / "av.json")
    assert fixed.depth_f == pytest.approx(1656.82, abs=0.01)
    assert fixed.extras["corrections"][0]["f_vga"] == pytest.approx(525.97, abs=0.01)
    res = run("fix-intrinsics", *meta_flags(FIVE), "--session", "ar", "--out", tmp_path / "ar.json")
    assert "361.58" in res.output
    res = run("fix-intrinsics", *meta_flags(IPHONE), "--session", "av", "--out", tmp_path / "ip.json")
    assert "no correction needed" in res.output
    assert load_meta(tmp_path / "ip.json") == load_meta(IPHONE[1])


def test_fix_depth_refuses_healthy_pair(run, tmp_path):
    meta = lookup("iPhone 11 Pro", "av", "iOS14")
    save_bundle(CaptureBundle(meta=meta, depth=DepthMap.full(1.0)), tmp_path / "b")
    res = run("fix-depth", tmp_path / "b", *meta_flags(IPHONE), "--out", tmp_path / "o")
    assert res.exit_code == 2
    res = run("fix-depth", tmp_path / "b", *meta_flags(IPHONE), "--out", tmp_path / "o", "--force")
    assert res.exit_code == 0
    assert (tmp_path / "o" / "depth.f32").read_bytes() == (tmp_path / "b" / "depth.f32").read_bytes()
    corrections = load_meta(tmp_path / "o" / "meta.json").extras["corrections"]
    assert corrections[-1]["zoom"] == [1.0, 1.0] and corrections[-1]["forced"]


def test_unproject_outputs(run, tmp_path):
    meta = lookup("iPhone 11 Pro", "av", "iOS14")
    save_bundle(CaptureBundle(meta=meta, depth=DepthMap(np.full((480, 640), np.nan))), tmp_path / "empty")
    assert run("unproject", tmp_path / "empty", "--out", tmp_path / "e.ply").exit_code == 0
    assert "element vertex 0\n" in (tmp_path / "e.ply").read_text()

    save_bundle(CaptureBundle(meta=meta, depth=DepthMap.full(2.0)), tmp_path / "flat")
    assert run("unproject", tmp_path / "flat").exit_code == 0
    pts = decode_ply((tmp_path / "flat" / "cloud.ply").read_bytes())
    assert len(pts) == 640 * 480 and np.all(pts[:, 2] == 2.0)

    save_bundle(CaptureBundle(meta=meta), tmp_path / "nodepth")
    assert run("unproject", tmp_path / "nodepth").exit_code == 1


def test_unproject_simulated_plane_is_flat(run, tmp_path):
    scene = scene_file(tmp_path, poses=[{"rvec": [0.3, -0.2, 0.0], "t": [0.0, 0.0, 0.25]}])
    run("simulate", scene, "--out", tmp_path / "d")
    assert run("unproject", tmp_path / "d" / "view_000", "--out", tmp_path / "c.ply").exit_code == 0
    pts = decode_ply((tmp_path / "c.ply").read_bytes())
    centred = pts - pts.mean(axis=0)
    rms = np.linalg.svd(centred, compute_uv=False)[-1] / np.sqrt(len(pts))
    assert rms < 1e-6


def test_verify_depth_outputs(run, tmp_path):
    scene = scene_file(tmp_path, bug={"kind": "focal", "factor": 1.0754},
                       poses=[{"rvec": [0, 0, 0], "t": [0, 0, 0.2]}])
    run("simulate", scene, "--out", tmp_path / "d")
    d = tmp_path / "d"
    res = run("verify-depth", d / "view_000", "--intrinsics", "factory", "--intrinsics", "corrected",
              "--av-meta", d / "meta_av.json", "--ar-meta", d / "meta_ar.json", "--out", tmp_path / "v")
    assert res.exit_code == 0, res.output
    lines = res.output.splitlines()
    assert lines[0].startswith("factory:") and "mean=-15.08" in lines[0]
    assert lines[1].startswith("corrected:") and "mean=0.000" in lines[1]
    report = json.loads((tmp_path / "v" / "report.json").read_text())
    assert [r["intrinsics_label"] for r in report["reports"]] == ["factory", "corrected"]
    assert (tmp_path / "v" / "hist.svg").read_text().startswith("<svg")
    assert (tmp_path / "v" / "hist.csv").read_text().startswith("label,bin_low")


def test_calibrate_exact_and_compare(run, tmp_path):
    k = Intrinsics(f=565.85, cx=319.5, cy=239.5)
    spec = SceneSpec(9, 6, 0.02, k, poses=hemisphere_poses(15, 3), render_depth=False, render_rgb=False)
    generate_dataset(spec, tmp_path / "d")
    res = run("calibrate", tmp_path / "d", "--init", "500")
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "d" / "calibration.json").read_text())
    assert abs(doc["f"] - 565.85) < 0.01
    assert doc["views_used"] + doc["views_rejected_voxel"] == 15
    assert doc["focal_discrepancy_percent"] < 1e-3

    res = run("calibrate", "--compare", "565.85", "531.97")
    assert res.exit_code == 0 and "5.99%" in res.output


def test_calibrate_single_view_fails(run, tmp_path):
    k = Intrinsics(f=565.85, cx=319.5, cy=239.5)
    generate_dataset(SceneSpec(9, 6, 0.02, k, poses=[frontal_pose(0.25)]), tmp_path / "d")
    assert run("calibrate", tmp_path / "d").exit_code == 1


@pytest.mark.parametrize("kind,factor,expected", [("zoom", 1 / 0.95074, "ZoomMisalignment"), ("focal", 1.0754, "WrongFocal")])
def test_simulate_then_audit(run, tmp_path, kind, factor, expected):
    scene = scene_file(tmp_path, bug={"kind": kind, "factor": factor})
    assert run("simulate", scene, "--out", tmp_path / "d").exit_code == 0
    d = tmp_path / "d"
    res = run("audit", "--av", d / "meta_av.json", "--ar", d / "meta_ar.json")
    assert res.exit_code == 2 and expected in res.output


def test_simulate_invalid_scene(run, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"board": {"cols": 9}}))
    res = run("simulate", path, "--out", tmp_path / "d")
    assert res.exit_code == 1 and "error" in res.output


def test_config_defaults_and_flag_precedence(run, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"audit": {"ird_threshold": 50.0, "depth_threshold": 50.0}}))
    assert run("--config", config, "audit", *FIVE).exit_code == 0
    assert run("--config", config, "audit", *FIVE, "--depth-threshold", "1").exit_code == 2
