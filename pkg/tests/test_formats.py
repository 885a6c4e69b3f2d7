import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from depthaudit.bench import SceneSpec, frontal_pose, render_view
from depthaudit.bundle import CaptureBundle, load_bundle, save_bundle
from depthaudit.camera import DepthMap, Intrinsics
from depthaudit.formats import (
    FormatError,
    decode_board,
    decode_corners,
    decode_depth,
    decode_ply,
    decode_ppm,
    encode_board,
    encode_corners,
    encode_depth,
    encode_ply,
    encode_ppm,
)
from depthaudit.metadata import lookup


def test_depth_layout():
    d = DepthMap.full(2.0)
    data = encode_depth(d)
    assert len(data) == 640 * 480 * 4 + 16
    assert struct.unpack_from("<4sIII", data) == (b"DPF1", 640, 480, 0)
    assert decode_depth(data) == d


def test_depth_nan_and_errors():
    values = np.full((480, 640), 1.25)
    values[3, 4] = np.nan
    assert decode_depth(encode_depth(DepthMap(values))) == DepthMap(values)
    with pytest.raises(FormatError):
        decode_depth(b"DPF0" + bytes(12))
    with pytest.raises(FormatError):
        decode_depth(encode_depth(DepthMap(values))[:-4])


@given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8), st.just(3))))
def test_ppm_round_trip(img):
    assert np.array_equal(decode_ppm(encode_ppm(img)), img)


def test_ppm_comment_header():
    img = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    data = encode_ppm(img).replace(b"P6\n", b"P6\n# made by hand\n")
    assert np.array_equal(decode_ppm(data), img)


def test_ply_header_and_empty():
    text = encode_ply(np.zeros((0, 3))).decode()
    assert text.startswith("ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\n")
    assert decode_ply(encode_ply(np.zeros((0, 3)))).shape == (0, 3)
    pts = np.array([[0.1, -2.5, 2.0]], dtype=np.float32)
    assert np.array_equal(decode_ply(encode_ply(pts)).astype(np.float32), pts)


def test_corners_and_board():
    ids = np.array([3, 1])
    pixels = np.array([[10.5, 20.25], [1e-3, 479.0]])
    got_ids, got_px = decode_corners(encode_corners(ids, pixels))
    assert np.array_equal(got_ids, ids) and np.array_equal(got_px, pixels)
    with pytest.raises(FormatError):
        decode_corners("u,v\n1,2\n")
    board = decode_board(encode_board([0, 1], [[0.0, 0.0, 0.0], [0.02, 0.0, 0.0]], 0.02))
    assert board == {0: (0.0, 0.0), 1: (0.02, 0.0)}


def test_bundle_round_trip(tmp_path):
    spec = SceneSpec(4, 3, 0.03, Intrinsics(500.0, 320.0, 240.0), poses=[frontal_pose(0.3)])
    view = render_view(spec, 0)
    save_bundle(view, tmp_path / "b")
    back = load_bundle(tmp_path / "b")
    assert back.meta == view.meta
    # float32 on disk
    assert np.array_equal(back.depth.values, view.depth.values.astype(np.float32))
    assert np.array_equal(back.rgb, view.rgb)
    assert np.array_equal(back.corners.pixels, view.corners.pixels)
    assert np.array_equal(back.corners.board, view.corners.board)


def test_bundle_without_optional_files(tmp_path):
    meta = lookup("iPhone 11 Pro", "av", "iOS14")
    save_bundle(CaptureBundle(meta=meta), tmp_path)
    back = load_bundle(tmp_path)
    assert back.depth is None and back.corners is None
