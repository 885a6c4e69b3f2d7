import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthaudit.camera import DepthMap, Intrinsics
from depthaudit.correction import (
    ZoomFactors,
    correct_focal_ar,
    correct_focal_av,
    corrected_focals,
    normalize_arkit_frame,
    zoom_depth_map,
)
from depthaudit.errors import DomainError
from depthaudit.metadata import lookup_pair


def test_zoom_factor_bounds():
    with pytest.raises(DomainError):
        ZoomFactors(0.5, 1.0)
    with pytest.raises(DomainError):
        ZoomFactors(1.0, 2.0)


def test_identity_zoom_is_exact(vga_k):
    rng = np.random.default_rng(0)
    d = DepthMap(rng.uniform(0.2, 2.0, (480, 640)))
    assert zoom_depth_map(d, vga_k, ZoomFactors(1.0, 1.0)) == d


def test_zoom_keeps_principal_point_and_values():
    k = Intrinsics(f=500.0, cx=320.0, cy=240.0)
    jj, ii = np.mgrid[0:480, 0:640].astype(float)
    d = DepthMap(1.0 + 0.001 * ii)
    out = zoom_depth_map(d, k, ZoomFactors(0.95, 0.95)).values
    assert out[240, 320] == d.values[240, 320]
    # zoom < 1 shrinks content, so the border has no source
    assert np.isnan(out[0, 0]) and np.isnan(out[479, 639])
    # linear ramp resampled about cx: value at q is ramp(cx + (q - cx)/z)
    assert out[240, 400] == pytest.approx(1.0 + 0.001 * (320 + 80 / 0.95))


def test_zoom_requires_depth_resolution():
    k = Intrinsics(f=1800.0, cx=1000.0, cy=750.0, ref_w=2016, ref_h=1512)
    with pytest.raises(DomainError):
        zoom_depth_map(DepthMap.full(1.0), k, ZoomFactors(1.0, 1.0))


def test_worked_examples():
    f_corr, f_vga = correct_focal_av(1781.78, 1916.17, 2016)
    assert f_corr == pytest.approx(1656.82, abs=0.01)
    assert f_vga == pytest.approx(525.97, abs=0.01)
    assert correct_focal_ar(1916.17, 1781.78, 2880)[1] == pytest.approx(361.58, abs=0.01)
    focals = corrected_focals(lookup_pair("iPad 11'' 3gen V1"))
    assert focals["av"][1] == pytest.approx(528.88, abs=0.02)
    assert focals["ar"][1] == pytest.approx(363.63, abs=0.02)


@given(f=st.floats(100, 5000), w=st.integers(640, 4032))
def test_agreeing_focals_are_fixed_points(f, w):
    assert correct_focal_av(f, f, w)[0] == pytest.approx(f)
    assert correct_focal_ar(f, f, w)[0] == pytest.approx(f)


def test_domain_errors():
    with pytest.raises(DomainError):
        correct_focal_av(0.0, 100.0, 640)
    with pytest.raises(DomainError):
        correct_focal_ar(100.0, 10.0, 640)  # drives the focal negative


def test_mirror_normalisation_is_involution(vga_k):
    rng = np.random.default_rng(3)
    d = DepthMap(rng.uniform(0.2, 2.0, (480, 640)))
    once, k1 = normalize_arkit_frame(d, vga_k)
    assert k1.cx == pytest.approx(639 - vga_k.cx)
    assert once.values[0, 0] == d.values[0, 639]
    twice, k2 = normalize_arkit_frame(once, k1)
    assert twice == d and k2 == vga_k
