"""Post-processing fixes: principal-point zoom, focal correction, ARKit mirroring."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .camera import DepthMap, Intrinsics
from .errors import DomainError
from .metadata import SessionPair
from . import kernels

VGA_WIDTH = 640


@dataclass(frozen=True)
class ZoomFactors:
    zx: float
    zy: float

    def __post_init__(self):
        for name in ("zx", "zy"):
            z = getattr(self, name)
            if not 0.5 < z < 2.0:
                raise DomainError(f"zoom factor {name}={z} outside (0.5, 2)")


def zoom_factors(pair: SessionPair) -> ZoomFactors:
    """AV over ARKit intrinsic reference dimensions, per axis."""
    (aw, ah), (rw, rh) = pair.av.ird, pair.ar.ird
    return ZoomFactors(aw / rw, ah / rh)


def zoom_depth_map(d: DepthMap, k: Intrinsics, z: ZoomFactors) -> DepthMap:
    """Zoom a depth raster about the principal point.

    Output pixel q samples the input at ``c + (q - c) / z``.  Depth values
    are resampled, never rescaled, and samples falling outside the source
    become NaN.
    """
    if (k.ref_w, k.ref_h) != (d.width, d.height):
        raise DomainError("intrinsics must be expressed at the depth resolution")
    jj, ii = np.mgrid[0 : d.height, 0 : d.width].astype(np.float64)
    # q + (q - c)(1/z - 1): exact identity for z == 1
    mx = ii + (ii - k.cx) * (1.0 / z.zx - 1.0)
    my = jj + (jj - k.cy) * (1.0 / z.zy - 1.0)
    return DepthMap(kernels.remap_bilinear(d.values, mx, my))


def _check_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v}")


def correct_focal_av(f_unscaled_av: float, f_unscaled_ar: float, ird_av_w: float):
    """Corrected AV depth focal (unscaled, VGA)."""
    _check_positive(f_unscaled_av=f_unscaled_av, f_unscaled_ar=f_unscaled_ar, ird_av_w=ird_av_w)
    f_corr = f_unscaled_av**2 / f_unscaled_ar
    return f_corr, f_corr * VGA_WIDTH / ird_av_w


def correct_focal_ar(f_unscaled_ar: float, f_unscaled_av: float, ird_ar_w: float):
    """Corrected ARKit depth focal (unscaled, VGA).

    The ARKit focal carries twice the AV error, so the relative correction
    is doubled.  This is an empirical rule, not a derived one.
    """
    _check_positive(f_unscaled_ar=f_unscaled_ar, f_unscaled_av=f_unscaled_av, ird_ar_w=ird_ar_w)
    f_corr = f_unscaled_ar * (1.0 + 2.0 * (1.0 - f_unscaled_ar / f_unscaled_av))
    if f_corr <= 0:
        raise DomainError(f"correction drives the focal length to {f_corr}")
    return f_corr, f_corr * VGA_WIDTH / ird_ar_w


def corrected_focals(pair: SessionPair) -> dict:
    f_av, f_ar = pair.av.depth_f, pair.ar.depth_f
    av = correct_focal_av(f_av, f_ar, pair.av.ird[0])
    ar = correct_focal_ar(f_ar, f_av, pair.ar.ird[0])
    return {"av": av, "ar": ar}


def normalize_arkit_frame(raster, k: Intrinsics):
    """Undo the left-right mirroring of ARKit frames.

    Returns the flipped raster (same type as the input) and intrinsics with
    ``cx' = (width - 1) - cx``.  Applying it twice is the identity.
    """
    values = raster.values if isinstance(raster, DepthMap) else np.asarray(raster)
    width = values.shape[1]
    if k.ref_w != width:
        raise DomainError("intrinsics must be expressed at the raster resolution")
    flipped = values[:, ::-1].copy()
    out = DepthMap(flipped) if isinstance(raster, DepthMap) else flipped
    return out, replace(k, cx=(width - 1) - k.cx)
