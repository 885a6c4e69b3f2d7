"""Hot per-pixel kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``DEPTHAUDIT_DISABLE_NUMBA`` is unset (or ``0``).  Both paths
evaluate the same arithmetic in the same order, so they agree to the bit
on IEEE-754 hardware; ``tests/test_kernels.py`` checks this.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("DEPTHAUDIT_DISABLE_NUMBA", "0") in ("", "0")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# bilinear remap

def remap_bilinear_numpy(src, map_x, map_y):
    """Sample ``src`` at (map_x, map_y) with bilinear weights.

    Integer coordinates address pixel centres.  Samples outside
    ``[0, w-1] x [0, h-1]`` and samples touching a NaN neighbour are NaN.
    A neighbour with zero weight is never read, so lattice-point samples
    return the source value exactly.
    """
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape
    x = np.asarray(map_x, dtype=np.float64)
    y = np.asarray(map_y, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y) & (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.where(ok, x, 0.0)
    ys = np.where(ok, y, 0.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    x1 = np.where(fx > 0.0, x0 + 1, x0)
    y1 = np.where(fy > 0.0, y0 + 1, y0)
    top = (1.0 - fx) * src[y0, x0] + fx * src[y0, x1]
    bot = (1.0 - fx) * src[y1, x0] + fx * src[y1, x1]
    out = (1.0 - fy) * top + fy * bot
    out[~ok] = np.nan
    return out


def _remap_bilinear_loop(src, map_x, map_y, out):
    h, w = src.shape
    ho, wo = map_x.shape
    for r in range(ho):
        for c in range(wo):
            x = map_x[r, c]
            y = map_y[r, c]
            if not (x >= 0.0 and x <= w - 1 and y >= 0.0 and y <= h - 1):
                out[r, c] = np.nan
                continue
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            fx = x - x0
            fy = y - y0
            x1 = x0 + 1 if fx > 0.0 else x0
            y1 = y0 + 1 if fy > 0.0 else y0
            top = (1.0 - fx) * src[y0, x0] + fx * src[y0, x1]
            bot = (1.0 - fx) * src[y1, x0] + fx * src[y1, x1]
            out[r, c] = (1.0 - fy) * top + fy * bot
    return out


if HAVE_NUMBA:
    _remap_bilinear_jit = numba.njit(cache=False, nogil=True)(_remap_bilinear_loop)
else:  # pragma: no cover
    _remap_bilinear_jit = None


def remap_bilinear_numba(src, map_x, map_y):
    if _remap_bilinear_jit is None:  # pragma: no cover
        raise RuntimeError("numba is not available")
    src = np.ascontiguousarray(src, dtype=np.float64)
    map_x = np.ascontiguousarray(map_x, dtype=np.float64)
    map_y = np.ascontiguousarray(map_y, dtype=np.float64)
    out = np.empty(map_x.shape, dtype=np.float64)
    return _remap_bilinear_jit(src, map_x, map_y, out)


def remap_bilinear(src, map_x, map_y):
    if USE_NUMBA:
        return remap_bilinear_numba(src, map_x, map_y)
    return remap_bilinear_numpy(src, map_x, map_y)


# --------------------------------------------------------------------------
# colour-ramp overlay blend

def blend_overlay_numpy(rgb, depth, inv_lo, inv_hi, ramp):
    """Blend a colour-coded inverse depth over ``rgb`` at alpha 0.5.

    ``depth`` has the RGB resolution; NaN pixels leave ``rgb`` untouched.
    """
    rgb = np.asarray(rgb, dtype=np.uint8)
    out = rgb.copy()
    valid = np.isfinite(depth)
    if not valid.any():
        return out
    inv = 1.0 / depth[valid]
    span = inv_hi - inv_lo
    t = (inv - inv_lo) / span if span > 0.0 else np.zeros_like(inv)
    idx = np.floor(t * 255.0 + 0.5).astype(np.int64)
    idx = np.clip(idx, 0, 255)
    colour = ramp[idx].astype(np.int64)
    base = rgb[valid].astype(np.int64)
    out[valid] = ((base + colour + 1) // 2).astype(np.uint8)
    return out


def _blend_overlay_loop(rgb, depth, inv_lo, inv_hi, ramp, out):
    h, w = depth.shape
    span = inv_hi - inv_lo
    for r in range(h):
        for c in range(w):
            d = depth[r, c]
            if not np.isfinite(d):
                for k in range(3):
                    out[r, c, k] = rgb[r, c, k]
                continue
            t = (1.0 / d - inv_lo) / span if span > 0.0 else 0.0
            i = int(np.floor(t * 255.0 + 0.5))
            if i < 0:
                i = 0
            elif i > 255:
                i = 255
            for k in range(3):
                out[r, c, k] = (int(rgb[r, c, k]) + int(ramp[i, k]) + 1) // 2
    return out


if HAVE_NUMBA:
    _blend_overlay_jit = numba.njit(cache=False, nogil=True)(_blend_overlay_loop)
else:  # pragma: no cover
    _blend_overlay_jit = None


def blend_overlay_numba(rgb, depth, inv_lo, inv_hi, ramp):
    if _blend_overlay_jit is None:  # pragma: no cover
        raise RuntimeError("numba is not available")
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    depth = np.ascontiguousarray(depth, dtype=np.float64)
    ramp = np.ascontiguousarray(ramp, dtype=np.uint8)
    out = np.empty_like(rgb)
    return _blend_overlay_jit(rgb, depth, float(inv_lo), float(inv_hi), ramp, out)


def blend_overlay(rgb, depth, inv_lo, inv_hi, ramp):
    if USE_NUMBA:
        return blend_overlay_numba(rgb, depth, inv_lo, inv_hi, ramp)
    return blend_overlay_numpy(rgb, depth, inv_lo, inv_hi, ramp)
