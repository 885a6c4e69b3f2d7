"""Pinhole camera model, depth rasters, projection and unprojection.

Pixel convention: integer coordinates ``(i, j)`` address pixel centres and
indices are 0-based, so the unprojection ray of pixel ``(i, j)`` is
``K^-1 [i, j, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AspectMismatch, DegenerateProjection, InvalidDepthSample
from . import kernels

DEPTH_WIDTH = 640
DEPTH_HEIGHT = 480


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics expressed at ``ref_w x ref_h`` pixels."""

    f: float
    cx: float
    cy: float
    ref_w: int = DEPTH_WIDTH
    ref_h: int = DEPTH_HEIGHT
    aspect: float = 1.0
    skew: float = 0.0

    def __post_init__(self):
        if not (self.f > 0 and math.isfinite(self.f)):
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (self.ref_w > 0 and self.ref_h > 0):
            raise ValueError("reference dimensions must be positive")
        if not (self.aspect > 0 and math.isfinite(self.aspect)):
            raise ValueError("aspect must be positive")
        if not (0 <= self.cx < self.ref_w and 0 <= self.cy < self.ref_h):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.ref_w}x{self.ref_h}"
            )

    @property
    def fy(self) -> float:
        return self.f * self.aspect

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.f, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def with_focal(self, f: float) -> "Intrinsics":
        return replace(self, f=float(f))


@dataclass(frozen=True, eq=False)
class DepthMap:
    """640x480 metric depth raster (metres), NaN marks invalid pixels.

    ``values[j, i]`` holds D(i, j): rows are image rows (v), columns are u.
    Stored as float64 in memory; the on-disk raster is float32.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (DEPTH_HEIGHT, DEPTH_WIDTH):
            raise ValueError(f"depth map must be {DEPTH_HEIGHT}x{DEPTH_WIDTH}, got {v.shape}")
        finite = v[np.isfinite(v)]
        if finite.size and not (finite > 0).all():
            raise ValueError("finite depth values must be positive")
        v[np.isinf(v)] = np.nan
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def full(cls, value: float) -> "DepthMap":
        return cls(np.full((DEPTH_HEIGHT, DEPTH_WIDTH), value, dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return np.array_equal(self.values, other.values, equal_nan=True)

    __hash__ = None


def project(p, k: Intrinsics) -> tuple[float, float]:
    """Project a camera-frame point to pixel coordinates."""
    x, y, z = (float(c) for c in p)
    if not z > 0:
        raise DegenerateProjection(f"point has non-positive depth z={z}")
    xn, yn = x / z, y / z
    return k.f * xn + k.skew * yn + k.cx, k.fy * yn + k.cy


def unproject_pixel(u: float, v: float, depth: float, k: Intrinsics) -> np.ndarray:
    """``depth * K^-1 [u, v, 1]``; the z component equals ``depth`` exactly."""
    yn = (v - k.cy) / k.fy
    xn = (u - k.cx - k.skew * yn) / k.f
    return np.array([xn * depth, yn * depth, depth])


def _check_index(d: DepthMap, i, j):
    if not (0 <= i < d.width and 0 <= j < d.height):
        raise IndexError(f"pixel ({i}, {j}) outside {d.width}x{d.height}")


def unproject(d: DepthMap, k: Intrinsics, i: int, j: int) -> np.ndarray:
    _check_index(d, i, j)
    depth = d.values[j, i]
    if not np.isfinite(depth):
        raise InvalidDepthSample(f"invalid depth at ({i}, {j})")
    return unproject_pixel(float(i), float(j), float(depth), k)


def unproject_all(d: DepthMap, k: Intrinsics) -> np.ndarray:
    """Point cloud (N, 3) of every finite pixel in row-major order."""
    jj, ii = np.nonzero(np.isfinite(d.values))
    depth = d.values[jj, ii]
    yn = (jj - k.cy) / k.fy
    xn = (ii - k.cx - k.skew * yn) / k.f
    return np.column_stack([xn * depth, yn * depth, depth])


def rescale_intrinsics(k: Intrinsics, new_w: int, new_h: int) -> Intrinsics:
    """Rescale intrinsics to another resolution with the same aspect ratio."""
    if new_w <= 0 or new_h <= 0:
        raise AspectMismatch("target dimensions must be positive")
    old_ratio = k.ref_w / k.ref_h
    new_ratio = new_w / new_h
    if abs(new_ratio - old_ratio) > 1e-6 * old_ratio:
        raise AspectMismatch(
            f"{k.ref_w}x{k.ref_h} -> {new_w}x{new_h} changes the aspect ratio"
        )
    if new_w == k.ref_w and new_h == k.ref_h:
        return k
    s = new_w / k.ref_w
    return replace(k, f=k.f * s, cx=k.cx * s, cy=k.cy * s, ref_w=int(new_w), ref_h=int(new_h))


def sample_bilinear(d: DepthMap, u: float, v: float) -> float:
    """Bilinear depth at sub-pixel ``(u, v)``; any invalid neighbour is an error."""
    if not (0 <= u <= d.width - 1 and 0 <= v <= d.height - 1):
        raise IndexError(f"sample ({u}, {v}) outside {d.width}x{d.height}")
    out = float(kernels.remap_bilinear_numpy(d.values, np.array([u]), np.array([v]))[0])
    if not math.isfinite(out):
        raise InvalidDepthSample(f"invalid depth neighbourhood at ({u}, {v})")
    return out


def sample_bilinear_many(d: DepthMap, uv) -> np.ndarray:
    """Vectorised :func:`sample_bilinear`; invalid or out-of-range samples are NaN."""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    return kernels.remap_bilinear_numpy(d.values, uv[:, 0], uv[:, 1])
