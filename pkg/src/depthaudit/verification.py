"""Depth verification against a board pose, colour overlays and histograms.

For each detected corner the depth raster is sampled bilinearly and
compared with the corner's Z in the camera frame from a PnP pose.  The
Z of a depth pixel does not depend on the intrinsics at all, while the
PnP translation scales with the focal length, so a wrong focal shows up
as a systematic offset ``d = Z_depth - Z_board``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .camera import DepthMap, Intrinsics, sample_bilinear_many
from .errors import DimensionError, NoValidSamples
from .pose import Correspondences, Pose, solve_pnp

DEFAULT_BIN_WIDTH = 0.25  # mm
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CornerDepth:
    id: int
    z_depth: float  # mm
    z_board: float  # mm
    d: float  # mm


@dataclass(frozen=True, eq=False)
class DepthErrorReport:
    records: tuple
    mean_d: float
    median_d: float
    std_d: float
    bin_edges: np.ndarray
    counts: np.ndarray
    intrinsics_label: str = "factory"
    n_invalid: int = 0
    pose: Pose | None = None
    rms_reproj: float = float("nan")
    bin_width: float = DEFAULT_BIN_WIDTH

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def d_values(self) -> np.ndarray:
        return np.array([r.d for r in self.records])

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "intrinsics_label": self.intrinsics_label,
            "count": self.count,
            "n_invalid": self.n_invalid,
            "mean_d_mm": self.mean_d,
            "median_d_mm": self.median_d,
            "std_d_mm": self.std_d,
            "rms_reproj_px": self.rms_reproj,
            "histogram": {
                "bin_width_mm": self.bin_width,
                "edges_mm": self.bin_edges.tolist(),
                "counts": self.counts.tolist(),
            },
            "corners": [
                {"id": r.id, "z_depth_mm": r.z_depth, "z_board_mm": r.z_board, "d_mm": r.d}
                for r in self.records
            ],
        }

    def summary(self) -> str:
        return (
            f"{self.intrinsics_label}: n={self.count} invalid={self.n_invalid} "
            f"mean={self.mean_d:.3f} mm median={self.median_d:.3f} mm std={self.std_d:.3f} mm"
        )


def histogram_edges(values, bin_width: float = DEFAULT_BIN_WIDTH) -> np.ndarray:
    """Bin edges on the ``bin_width`` lattice covering ``values``; at least one bin."""
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise NoValidSamples("cannot bin an empty sample")
    lo = math.floor(values.min() / bin_width)
    hi = math.ceil(values.max() / bin_width)
    if hi <= lo:
        hi = lo + 1
    return np.arange(lo, hi + 1) * bin_width


def histogram_counts(values, edges) -> np.ndarray:
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=edges)
    return counts.astype(np.int64)


def verify_depth(
    d: DepthMap,
    corrs: Correspondences,
    k: Intrinsics,
    label: str = "factory",
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> DepthErrorReport:
    """Compare sampled depth with PnP board depth at every corner."""
    if (k.ref_w, k.ref_h) != (d.width, d.height):
        raise DimensionError(
            f"intrinsics reference {k.ref_w}x{k.ref_h} differs from depth {d.width}x{d.height}"
        )
    pose, rms = solve_pnp(corrs, k)
    z_board = pose.apply(corrs.board)[:, 2]
    z_depth = sample_bilinear_many(d, corrs.pixels)
    valid = np.isfinite(z_depth)
    if not valid.any():
        raise NoValidSamples("no corner has a valid depth neighbourhood")
    zd = z_depth[valid] * 1000.0
    zb = z_board[valid] * 1000.0
    diff = zd - zb
    records = tuple(
        CornerDepth(int(i), float(a), float(b), float(c))
        for i, a, b, c in zip(corrs.ids[valid], zd, zb, diff)
    )
    edges = histogram_edges(diff, bin_width)
    return DepthErrorReport(
        records=records,
        mean_d=float(np.mean(diff)),
        median_d=float(np.median(diff)),
        std_d=float(np.std(diff)),
        bin_edges=edges,
        counts=histogram_counts(diff, edges),
        intrinsics_label=label,
        n_invalid=int(np.count_nonzero(~valid)),
        pose=pose,
        rms_reproj=rms,
        bin_width=bin_width,
    )


# --------------------------------------------------------------------------
# overlay

def color_ramp() -> np.ndarray:
    """256-entry blue -> green -> red ramp, uint8 (256, 3).  Index 255 is nearest."""
    t = np.arange(256) / 255.0
    lower = t < 0.5
    r = np.where(lower, 0.0, 2.0 * t - 1.0)
    g = np.where(lower, 2.0 * t, 2.0 - 2.0 * t)
    b = np.where(lower, 1.0 - 2.0 * t, 0.0)
    return np.floor(np.column_stack([r, g, b]) * 255.0 + 0.5).astype(np.uint8)


RAMP = color_ramp()


def depth_to_color_grid(d: DepthMap, k_color: Intrinsics) -> np.ndarray:
    """Bilinearly resample depth onto the colour pixel grid (proportional intrinsics)."""
    w, h = k_color.ref_w, k_color.ref_h
    s = d.width / w
    jj, ii = np.mgrid[0:h, 0:w].astype(np.float64)
    mx = np.minimum(ii * s, d.width - 1.0)
    my = np.minimum(jj * s, d.height - 1.0)
    return kernels.remap_bilinear(d.values, mx, my)


def render_overlay(rgb, d: DepthMap, k_color: Intrinsics, inv_range=None) -> np.ndarray:
    """Colour-coded inverse depth blended at 50% over ``rgb``.

    ``inv_range`` fixes the (near, far) normalisation in 1/m; by default it
    spans the valid inverse depths of ``d``.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise DimensionError("overlay needs an (H, W, 3) uint8 image")
    h, w = rgb.shape[:2]
    if (w, h) != (k_color.ref_w, k_color.ref_h):
        raise DimensionError(f"image {w}x{h} does not match colour intrinsics {k_color.ref_w}x{k_color.ref_h}")
    if w * d.height != h * d.width:
        raise DimensionError(f"image {w}x{h} is not proportional to depth {d.width}x{d.height}")
    depth = depth_to_color_grid(d, k_color)
    if inv_range is None:
        valid = d.values[np.isfinite(d.values)]
        if valid.size == 0:
            return rgb.copy()
        inv_lo, inv_hi = float(1.0 / valid.max()), float(1.0 / valid.min())
    else:
        inv_lo, inv_hi = (float(v) for v in inv_range)
    return kernels.blend_overlay(rgb, depth, inv_lo, inv_hi, RAMP)


# --------------------------------------------------------------------------
# histogram documents

SVG_WIDTH = 800
SVG_HEIGHT = 600
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass
class HistogramDocument:
    svg: str
    csv: str
    edges: np.ndarray
    counts: dict = field(default_factory=dict)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def emit_histogram(reports, bin_width: float | None = None) -> HistogramDocument:
    """Shared-bin histogram of one or more reports as SVG and CSV."""
    if isinstance(reports, DepthErrorReport):
        reports = [reports]
    reports = list(reports)
    if not reports or any(r.count == 0 for r in reports):
        raise NoValidSamples("histogram needs non-empty reports")
    width = bin_width or reports[0].bin_width
    labels = [r.intrinsics_label for r in reports]
    if len(set(labels)) != len(labels):
        labels = [f"{lab} #{n + 1}" for n, lab in enumerate(labels)]
    everything = np.concatenate([r.d_values for r in reports])
    edges = histogram_edges(everything, width)
    counts = {lab: histogram_counts(r.d_values, edges) for lab, r in zip(labels, reports)}
    return HistogramDocument(
        svg=_render_svg(edges, counts), csv=_render_csv(edges, counts), edges=edges, counts=counts
    )


def _render_csv(edges, counts: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    multi = len(counts) > 1
    writer.writerow(["label", "bin_low", "bin_high", "count"] if multi else ["bin_low", "bin_high", "count"])
    for label, c in counts.items():
        for lo, hi, n in zip(edges[:-1], edges[1:], c):
            row = [repr(float(lo)), repr(float(hi)), int(n)]
            writer.writerow([label] + row if multi else row)
    return buf.getvalue()


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _render_svg(edges, counts: dict) -> str:
    left, right, top, bottom = 80, 30, 40, 70
    pw = SVG_WIDTH - left - right
    ph = SVG_HEIGHT - top - bottom
    n_bins = len(edges) - 1
    n_series = len(counts)
    peak = max(int(c.max()) for c in counts.values()) or 1
    lo, hi = float(edges[0]), float(edges[-1])

    def sx(x):
        return left + (x - lo) / (hi - lo) * pw

    def sy(y):
        return top + ph - y / peak * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
    ]
    slot = pw / n_bins
    bar = slot / n_series
    for s, (label, c) in enumerate(counts.items()):
        color = SERIES_COLORS[s % len(SERIES_COLORS)]
        for b in range(n_bins):
            if c[b] == 0:
                continue
            x = left + b * slot + s * bar
            y = sy(int(c[b]))
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar)}" '
                f'height="{_fmt(top + ph - y)}" fill="{color}" fill-opacity="0.8"/>'
            )
    # axes
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    step = max(1, math.ceil(n_bins / 10))
    for b in range(0, n_bins + 1, step):
        x = sx(float(edges[b]))
        out.append(f'<line x1="{_fmt(x)}" y1="{top + ph}" x2="{_fmt(x)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{_fmt(x)}" y="{top + ph + 20}" font-size="12" text-anchor="middle">'
            f"{float(edges[b]):.2f}</text>"
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac * peak)
        out.append(
            f'<text x="{left - 8}" y="{_fmt(y + 4)}" font-size="12" text-anchor="end">'
            f"{frac * peak:.0f}</text>"
        )
    out.append(
        f'<text x="{left + pw / 2:.2f}" y="{SVG_HEIGHT - 20}" font-size="14" '
        f'text-anchor="middle">d = Z_depth - Z_board [mm]</text>'
    )
    out.append(
        f'<text x="20" y="{top + ph / 2:.2f}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 20 {top + ph / 2:.2f})">corners</text>'
    )
    for s, label in enumerate(counts):
        color = SERIES_COLORS[s % len(SERIES_COLORS)]
        y = top + 10 + 20 * s
        out.append(f'<rect x="{left + pw - 160}" y="{y}" width="12" height="12" fill="{color}"/>')
        out.append(
            f'<text class="legend" x="{left + pw - 142}" y="{y + 11}" font-size="12">{_escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
