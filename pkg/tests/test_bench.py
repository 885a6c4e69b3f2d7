import numpy as np
import pytest

from depthaudit.bench import (
    BugSpec,
    SceneSpec,
    frontal_pose,
    generate_calibration_dataset,
    hemisphere_poses,
    render_depth,
    render_view,
    scene_from_dict,
    session_pair,
)
from depthaudit.camera import Intrinsics
from depthaudit.correction import correct_focal_av, zoom_depth_map, zoom_factors
from depthaudit.errors import DegenerateScene
from depthaudit.pose import Pose

from conftest import tree_digest

K = Intrinsics(f=565.85, cx=319.5, cy=239.5)


def spec(**kw):
    kw.setdefault("poses", [frontal_pose(0.2)])
    return SceneSpec(9, 6, 0.02, K, **kw)


def test_frontal_plane_depth():
    view = render_view(spec(), 0)
    assert np.all(view.depth.values == 0.2)
    assert len(view.corners) == 54


def test_focal_lie_touches_only_metadata():
    clean, lied = spec(), spec(bug=BugSpec("focal", 1.0754))
    pair = session_pair(lied)
    assert pair.av.depth_f == pytest.approx(session_pair(clean).av.depth_f * 1.0754)
    a, b = render_view(clean, 0), render_view(lied, 0)
    assert a.depth == b.depth
    assert np.array_equal(a.corners.pixels, b.corners.pixels)
    f, _ = correct_focal_av(pair.av.depth_f, pair.ar.depth_f, pair.av.ird[0])
    assert f == pytest.approx(session_pair(clean).av.depth_f, rel=1e-3)


def test_zoom_stretch_round_trip():
    pose = Pose.from_rvec([0.3, -0.2, 0.0], [0.0, 0.0, 0.22])
    s = spec(poses=[pose], bug=BugSpec("zoom", 1 / 0.95074))
    view = render_view(s, 0)
    assert np.array_equal(view.corners.pixels, render_view(spec(poses=[pose]), 0).corners.pixels)
    fixed = zoom_depth_map(view.depth, K, zoom_factors(session_pair(s))).values
    clean = render_depth(s, pose)
    ok = np.isfinite(fixed)
    assert np.sqrt(np.mean((fixed[ok] - clean[ok]) ** 2)) < 1e-3


def test_board_behind_camera():
    s = spec(poses=[Pose(np.eye(3), [0, 0, -0.2])])
    with pytest.raises(DegenerateScene):
        render_view(s, 0)
    with pytest.raises(IndexError):
        render_view(spec(), 1)


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(9, 6, 0.0, K)
    with pytest.raises(ValueError):
        BugSpec("zoom", 2.5)
    with pytest.raises(ValueError):
        scene_from_dict({"board": {}})


def test_noise_is_seeded_per_view():
    poses = hemisphere_poses(3, 1)
    a = render_view(spec(poses=poses, corner_noise_sigma=0.5, depth_noise_sigma=0.001, rng_seed=4), 2)
    b = render_view(spec(poses=poses, corner_noise_sigma=0.5, depth_noise_sigma=0.001, rng_seed=4), 2)
    c = render_view(spec(poses=poses, corner_noise_sigma=0.5, depth_noise_sigma=0.001, rng_seed=5), 2)
    assert np.array_equal(a.corners.pixels, b.corners.pixels) and a.depth == b.depth
    assert not np.array_equal(a.corners.pixels, c.corners.pixels)


def test_hemisphere_poses_face_the_board():
    for pose in hemisphere_poses(30, 9):
        assert pose.translation[2] > 0.15
        assert pose.is_orthonormal()


def test_calibration_dataset_layout(tmp_path):
    s = spec(poses=hemisphere_poses(3, 2), render_depth=False, render_rgb=False)
    out = generate_calibration_dataset(s, tmp_path / "d", threads=2)
    files = tree_digest(out)
    assert "board.json" in files and "view_002/corners.csv" in files
    with pytest.raises(ValueError):
        generate_calibration_dataset(spec(), tmp_path / "e")
