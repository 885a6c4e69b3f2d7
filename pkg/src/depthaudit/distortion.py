"""Radial distortion lookup tables.

A table holds magnification factors ``m`` sampled uniformly in normalised
radius ``r / r_max`` over ``[0, 1]``, where ``r_max`` is the distance from
the distortion centre to the farthest image corner.  A point ``p`` maps to
``c + (1 + m) (p - c)``.  Forward and inverse tables are applied with the
same routine; the inverse is never computed by inverting the forward table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InsufficientPoints
from . import kernels


@dataclass(frozen=True, eq=False)
class RadialLut:
    magnifications: np.ndarray
    center: tuple[float, float]
    ref_w: int
    ref_h: int

    def __post_init__(self):
        m = np.array(self.magnifications, dtype=np.float64).ravel()
        if m.size < 2:
            raise ValueError("a radial LUT needs at least 2 entries")
        if not np.isfinite(m).all():
            raise ValueError("LUT entries must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "magnifications", m)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def r_max(self) -> float:
        return _farthest_corner(self.center, self.ref_w, self.ref_h)

    def scaled(self, width: int, height: int) -> "RadialLut":
        """The same table for a raster proportional to the reference size."""
        sx, sy = width / self.ref_w, height / self.ref_h
        if abs(sx - sy) > 1e-6 * sx:
            raise DimensionError(
                f"raster {width}x{height} is not proportional to {self.ref_w}x{self.ref_h}"
            )
        if width == self.ref_w:
            return self
        c = (self.center[0] * sx, self.center[1] * sx)
        return RadialLut(self.magnifications, c, width, height)

    def magnification_at(self, r) -> np.ndarray:
        grid = np.linspace(0.0, 1.0, self.magnifications.size)
        return np.interp(np.asarray(r, dtype=np.float64) / self.r_max, grid, self.magnifications)

    def __eq__(self, other):
        if not isinstance(other, RadialLut):
            return NotImplemented
        return (
            np.array_equal(self.magnifications, other.magnifications)
            and self.center == other.center
            and (self.ref_w, self.ref_h) == (other.ref_w, other.ref_h)
        )

    __hash__ = None


def _farthest_corner(center, w, h) -> float:
    cx, cy = center
    return float(max(np.hypot(x - cx, y - cy) for x in (0.0, w) for y in (0.0, h)))


def warp_points(lut: RadialLut, u, v) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    du = u - lut.center[0]
    dv = v - lut.center[1]
    m = lut.magnification_at(np.hypot(du, dv))
    # p + m (p - c) is c + (1 + m)(p - c) but exact for m == 0
    return u + m * du, v + m * dv


def warp_point(lut: RadialLut, u: float, v: float) -> tuple[float, float]:
    wu, wv = warp_points(lut, u, v)
    return float(wu), float(wv)


def warp_image(img, lut: RadialLut) -> np.ndarray:
    """Resample ``img`` so that output pixel q takes the input at warp_point(q).

    Float rasters get NaN where the source sample falls outside; integer
    rasters get 0 and keep their dtype.
    """
    img = np.asarray(img)
    if img.ndim not in (2, 3):
        raise DimensionError(f"expected a 2-D or 3-D raster, got shape {img.shape}")
    h, w = img.shape[:2]
    lut = lut.scaled(w, h)
    jj, ii = np.mgrid[0:h, 0:w].astype(np.float64)
    mx, my = warp_points(lut, ii, jj)
    planes = img[..., None] if img.ndim == 2 else img
    out = np.stack(
        [kernels.remap_bilinear(planes[..., c].astype(np.float64), mx, my) for c in range(planes.shape[2])],
        axis=-1,
    )
    if img.ndim == 2:
        out = out[..., 0]
    if np.issubdtype(img.dtype, np.integer):
        info = np.iinfo(img.dtype)
        out = np.nan_to_num(out, nan=0.0)
        return np.clip(np.floor(out + 0.5), info.min, info.max).astype(img.dtype)
    return out


def detect_residual_distortion(groups) -> float:
    """Max RMS perpendicular residual of total-least-squares line fits.

    Each group is a set of pixels that should lie on one straight line.
    """
    groups = list(groups)
    if not groups:
        raise InsufficientPoints("need at least one point group")
    worst = 0.0
    for g in groups:
        pts = np.asarray(g, dtype=np.float64).reshape(-1, 2)
        if len(pts) < 3:
            raise InsufficientPoints(f"line group has {len(pts)} points, need >= 3")
        centred = pts - pts.mean(axis=0)
        s = np.linalg.svd(centred, compute_uv=False)
        worst = max(worst, float(s[-1] / np.sqrt(len(pts))))
    return worst


def invert_lut(lut: RadialLut, n: int | None = None) -> RadialLut:
    """Numerically inverse table: warp_point(inv, warp_point(lut, p)) ~= p.

    Used to build consistent synthetic table pairs.  Requires the forward
    radial map ``r -> r (1 + m)`` to be increasing.
    """
    n = n or lut.magnifications.size
    r_max = lut.r_max
    r_dense = np.linspace(0.0, r_max * 1.5, 20001)
    r_warped = r_dense * (1.0 + lut.magnification_at(r_dense))
    if np.any(np.diff(r_warped) <= 0):
        raise ValueError("forward radial map is not monotone; no inverse table")
    s = np.linspace(0.0, 1.0, n) * r_max
    r_src = np.interp(s, r_warped, r_dense)
    m = np.empty(n)
    m[1:] = r_src[1:] / s[1:] - 1.0
    m[0] = 1.0 / (1.0 + lut.magnifications[0]) - 1.0
    return RadialLut(m, lut.center, lut.ref_w, lut.ref_h)
