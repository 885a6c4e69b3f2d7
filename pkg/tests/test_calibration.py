import warnings

import numpy as np
import pytest

from depthaudit.bench import SceneSpec, hemisphere_poses, look_at_pose, render_view
from depthaudit.calibration import (
    CalibrationView,
    calibrate_dataset,
    calibrate_focal,
    estimate_camera_centers,
    focal_discrepancy,
    select_views,
)
from depthaudit.camera import Intrinsics
from depthaudit.errors import DomainError, IllConditioned, NoUsableViews
from depthaudit.pose import Pose

K = Intrinsics(f=565.85, cx=319.5, cy=239.5)


def views_for(poses, noise=0.0, seed=0):
    spec = SceneSpec(9, 6, 0.02, K, poses=poses, corner_noise_sigma=noise, rng_seed=seed,
                     render_depth=False, render_rgb=False)
    return [CalibrationView(render_view(spec, i).corners) for i in range(len(poses))]


def test_view_acceptance_rule():
    views = views_for([look_at_pose([0, 0, -0.25])])
    assert views[0].accepted
    few = CalibrationView(views[0].corners.subset(np.arange(9)))
    assert not few.accepted
    with pytest.raises(ValueError):
        CalibrationView(few.corners, accepted=True)


def test_clustered_views_collapse_to_one():
    poses = [look_at_pose([0.011 + 0.001 * i, 0.012, -0.245]) for i in range(5)]
    views = estimate_camera_centers(views_for(poses), K)
    assert len(select_views(views, 0.03)) == 1
    # a fine grid keeps them apart
    assert len(select_views(views, 0.0005)) == 5


def test_select_views_errors():
    with pytest.raises(NoUsableViews):
        select_views([])
    few = views_for([look_at_pose([0, 0, -0.25])])[0]
    few = CalibrationView(few.corners.subset(np.arange(5)), camera_center_estimate=[0, 0, -0.25])
    with pytest.raises(NoUsableViews):
        select_views([few])


def test_camera_center_estimate_matches_truth():
    pose = look_at_pose([0.05, -0.03, -0.22])
    est = estimate_camera_centers(views_for([pose]), K)[0]
    assert np.allclose(est.camera_center_estimate, [0.05, -0.03, -0.22], atol=1e-9)


def test_exact_recovery_from_far_guess():
    views = views_for(hemisphere_poses(12, 4))
    result = calibrate_focal(views, K.with_focal(K.f * 0.75))
    assert result.f == pytest.approx(K.f, abs=1e-6)
    assert result.rms_reproj < 1e-6
    assert result.views_used == 12 and not result.ill_conditioned


def test_needs_three_views():
    views = views_for(hemisphere_poses(2, 1))
    with pytest.raises(NoUsableViews):
        calibrate_focal(views, K)


def test_frontal_only_views_are_ill_conditioned():
    # fronto-parallel views at one distance cannot separate f from depth
    poses = [Pose(np.eye(3), [0.01 * i, -0.005 * i, 0.25]) for i in range(4)]
    views = views_for(poses)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = calibrate_focal(views, K.with_focal(600.0))
    assert result.ill_conditioned
    assert any(issubclass(w.category, IllConditioned) for w in caught)


def test_dataset_pipeline_counts():
    views = views_for(hemisphere_poses(20, 8), noise=0.3, seed=8)
    views.append(CalibrationView(views[0].corners.subset(np.arange(6))))
    result = calibrate_dataset(views, K.with_focal(600.0))
    assert result.views_rejected_corners == 1
    assert result.views_used + result.views_rejected_voxel == 20
    assert abs(result.f - K.f) / K.f < 0.01


def test_focal_discrepancy():
    assert focal_discrepancy(565.85, 531.97) == pytest.approx(5.99, abs=0.01)
    assert focal_discrepancy(500.0, 500.0) == 0.0
    with pytest.raises(DomainError):
        focal_discrepancy(0.0, 1.0)
