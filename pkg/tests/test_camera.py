import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthaudit.camera import (
    DepthMap,
    Intrinsics,
    project,
    rescale_intrinsics,
    sample_bilinear,
    sample_bilinear_many,
    unproject,
    unproject_all,
    unproject_pixel,
)
from depthaudit.errors import AspectMismatch, DegenerateProjection, InvalidDepthSample


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        Intrinsics(f=0.0, cx=320, cy=240)
    with pytest.raises(ValueError):
        Intrinsics(f=500.0, cx=640.0, cy=240)
    k = Intrinsics(f=500.0, cx=320, cy=240, aspect=1.01, skew=0.5)
    assert k.matrix()[1, 1] == pytest.approx(505.0)
    assert k.matrix()[0, 1] == 0.5


def test_project_rejects_points_behind(vga_k):
    with pytest.raises(DegenerateProjection):
        project([0.0, 0.0, 0.0], vga_k)
    with pytest.raises(DegenerateProjection):
        project([0.1, 0.0, -1.0], vga_k)


def test_principal_point_round_trip(vga_k):
    d = DepthMap.full(1.5)
    # pixel (319.5, 239.5) is not a lattice point; check both sides of it
    p = unproject(d, vga_k, 320, 240)
    assert p[2] == 1.5
    assert project(p, vga_k) == pytest.approx((320.0, 240.0), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    u=st.floats(0, 639),
    v=st.floats(0, 479),
    z=st.floats(0.05, 10.0),
    f=st.floats(200, 2000),
    skew=st.floats(-2, 2),
    aspect=st.floats(0.9, 1.1),
)
def test_unproject_project_round_trip(u, v, z, f, skew, aspect):
    k = Intrinsics(f=f, cx=310.0, cy=245.0, aspect=aspect, skew=skew)
    p = unproject_pixel(u, v, z, k)
    assert p[2] == z
    pu, pv = project(p, k)
    assert pu == pytest.approx(u, abs=1e-9)
    assert pv == pytest.approx(v, abs=1e-9)


def test_depth_z_independent_of_intrinsics():
    d = DepthMap.full(0.7)
    a = unproject(d, Intrinsics(500.0, 320, 240), 10, 20)
    b = unproject(d, Intrinsics(650.0, 300, 250), 10, 20)
    assert a[2] == b[2] == pytest.approx(0.7)


def test_depth_map_rules():
    with pytest.raises(ValueError):
        DepthMap(np.ones((10, 10)))
    with pytest.raises(ValueError):
        DepthMap(np.full((480, 640), -1.0))
    values = np.ones((480, 640))
    values[0, 0] = np.inf
    d = DepthMap(values)
    assert np.isnan(d.values[0, 0])
    assert not d.values.flags.writeable
    assert d == DepthMap(values)


def test_unproject_errors():
    values = np.ones((480, 640))
    values[5, 7] = np.nan
    d = DepthMap(values)
    k = Intrinsics(500.0, 320, 240)
    with pytest.raises(InvalidDepthSample):
        unproject(d, k, 7, 5)
    with pytest.raises(IndexError):
        unproject(d, k, 640, 0)


def test_unproject_all_row_major():
    values = np.full((480, 640), np.nan)
    values[2, 3] = 1.0
    values[1, 600] = 2.0
    cloud = unproject_all(DepthMap(values), Intrinsics(500.0, 320, 240))
    assert cloud.shape == (2, 3)
    assert list(cloud[:, 2]) == [2.0, 1.0]


def test_rescale():
    k = Intrinsics(f=1781.78, cx=1009.89, cy=759.69, ref_w=2016, ref_h=1512)
    vga = rescale_intrinsics(k, 640, 480)
    assert vga.f == pytest.approx(565.644, abs=1e-3)
    assert rescale_intrinsics(k, 2016, 1512) is k
    back = rescale_intrinsics(vga, 2016, 1512)
    assert back.f == pytest.approx(k.f) and back.cx == pytest.approx(k.cx)
    with pytest.raises(AspectMismatch):
        rescale_intrinsics(k, 640, 360)


def test_bilinear_sampling():
    jj, ii = np.mgrid[0:480, 0:640].astype(float)
    d = DepthMap(1.0 + 0.001 * ii + 0.002 * jj)
    assert sample_bilinear(d, 10.25, 20.5) == pytest.approx(1.0 + 0.01025 + 0.041)
    assert sample_bilinear(d, 639, 479) == pytest.approx(1.0 + 0.639 + 0.958)
    with pytest.raises(IndexError):
        sample_bilinear(d, -0.1, 3)
    values = d.values.copy()
    values[21, 11] = np.nan
    holed = DepthMap(values)
    with pytest.raises(InvalidDepthSample):
        sample_bilinear(holed, 10.5, 20.5)
    # exactly on a valid lattice pixel next to the hole
    assert sample_bilinear(holed, 10, 20) == pytest.approx(d.values[20, 10])
    many = sample_bilinear_many(holed, [[10.5, 20.5], [5, 5], [700, 1]])
    assert np.isnan(many[0]) and np.isnan(many[2]) and many[1] == pytest.approx(d.values[5, 5])
