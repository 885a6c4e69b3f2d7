"""Capture bundle directories.

A bundle is a directory holding ``meta.json``, ``depth.f32`` and
``rgb.ppm``, plus optionally ``corners.csv`` and ``board.json``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import DepthMap
from .formats import (
    decode_board,
    decode_corners,
    encode_board,
    encode_corners,
    join_corners,
    read_depth,
    read_ppm,
    write_depth,
    write_ppm,
)
from .metadata import CaptureMeta, load_meta, serialize_meta
from .pose import Correspondences

META = "meta.json"
DEPTH = "depth.f32"
RGB = "rgb.ppm"
CORNERS = "corners.csv"
BOARD = "board.json"


@dataclass(frozen=True, eq=False)
class CaptureBundle:
    meta: CaptureMeta
    depth: DepthMap | None = None
    rgb: np.ndarray | None = None
    corners: Correspondences | None = None
    square_size: float | None = None


def save_bundle(bundle: CaptureBundle, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / META).write_text(serialize_meta(bundle.meta), encoding="utf-8")
    if bundle.depth is not None:
        write_depth(directory / DEPTH, bundle.depth)
    if bundle.rgb is not None:
        write_ppm(directory / RGB, bundle.rgb)
    if bundle.corners is not None:
        c = bundle.corners
        (directory / CORNERS).write_text(encode_corners(c.ids, c.pixels), encoding="utf-8")
        (directory / BOARD).write_text(
            encode_board(c.ids, c.board, bundle.square_size), encoding="utf-8"
        )
    return directory


def load_corners(corners_path, board_path) -> Correspondences:
    ids, pixels = decode_corners(Path(corners_path).read_text(encoding="utf-8"))
    board = decode_board(Path(board_path).read_text(encoding="utf-8"))
    return join_corners(ids, pixels, board)


def load_bundle(directory, board_path=None) -> CaptureBundle:
    """Load a bundle; ``board_path`` overrides the bundle's own board.json."""
    directory = Path(directory)
    meta = load_meta(directory / META)
    depth = read_depth(directory / DEPTH) if (directory / DEPTH).exists() else None
    rgb = read_ppm(directory / RGB) if (directory / RGB).exists() else None
    corners = None
    board = Path(board_path) if board_path else directory / BOARD
    if (directory / CORNERS).exists() and board.exists():
        corners = load_corners(directory / CORNERS, board)
    return CaptureBundle(meta=meta, depth=depth, rgb=rgb, corners=corners)
