"""Synthetic ground-truth scenes and device-bug injectors.

Scenes are rendered pre-rectified and, for ARKit sessions, already
un-mirrored.  The depth raster is the board plane extended over the whole
frame, so every corner has a valid bilinear neighbourhood.

Bug injectors:

* ``zoom``: the ARKit depth raster is stretched about the principal point
  by ``factor`` and the ARKit reference dimensions grow by the same
  factor; corners and the AV session are untouched.
* ``focal``: the AV depth focal is multiplied by ``factor`` and the ARKit
  one by ``factor**2``; rasters are untouched.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bundle import BOARD, CaptureBundle, save_bundle
from .camera import DEPTH_HEIGHT, DEPTH_WIDTH, DepthMap, Intrinsics, rescale_intrinsics
from .errors import DegenerateScene
from .formats import encode_board
from .metadata import Api, CaptureMeta, SessionPair, serialize_meta
from .pose import Correspondences, Pose, denormalize_points, rodrigues
from .rng import stream

BUG_KINDS = ("none", "zoom", "focal")
DEFAULT_IRD = (3088, 2316)


@dataclass(frozen=True)
class BugSpec:
    kind: str = "none"
    factor: float = 1.0

    def __post_init__(self):
        if self.kind not in BUG_KINDS:
            raise ValueError(f"unknown bug kind {self.kind!r}; expected one of {BUG_KINDS}")
        if self.kind != "none" and not 0.5 < self.factor < 2.0:
            raise ValueError(f"bug factor {self.factor} outside (0.5, 2)")


@dataclass(frozen=True)
class SceneSpec:
    board_cols: int
    board_rows: int
    square_size: float
    true_intrinsics: Intrinsics
    poses: tuple = ()
    corner_noise_sigma: float = 0.0
    depth_noise_sigma: float = 0.0
    bug: BugSpec = field(default_factory=BugSpec)
    rng_seed: int = 0
    ird: tuple[int, int] = DEFAULT_IRD
    device: str = "synthetic"
    os_version: str = "sim"
    render_depth: bool = True
    render_rgb: bool = True

    def __post_init__(self):
        if self.square_size <= 0:
            raise ValueError("square size must be positive")
        if self.board_cols < 2 or self.board_rows < 2:
            raise ValueError("board needs at least 2x2 corners")
        k = self.true_intrinsics
        if (k.ref_w, k.ref_h) != (DEPTH_WIDTH, DEPTH_HEIGHT):
            raise ValueError("true intrinsics must be expressed at 640x480")
        if self.corner_noise_sigma < 0 or self.depth_noise_sigma < 0:
            raise ValueError("noise levels must be non-negative")
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "ird", (int(self.ird[0]), int(self.ird[1])))

    @property
    def session(self) -> Api:
        """Session the rendered bundles come from: ARKit when the zoom bug is on."""
        return Api.ARKIT if self.bug.kind == "zoom" else Api.AV

    def board_ids(self) -> np.ndarray:
        return np.arange(self.board_cols * self.board_rows)

    def board_points(self) -> np.ndarray:
        """Inner corners centred on the board origin, row-major ids."""
        jj, ii = np.mgrid[0 : self.board_rows, 0 : self.board_cols]
        x = (ii.ravel() - (self.board_cols - 1) / 2.0) * self.square_size
        y = (jj.ravel() - (self.board_rows - 1) / 2.0) * self.square_size
        return np.column_stack([x, y, np.zeros_like(x)])


# --------------------------------------------------------------------------
# metadata

def _session_meta(spec, api, f_unscaled, ird) -> CaptureMeta:
    k = spec.true_intrinsics
    s = ird[0] / DEPTH_WIDTH
    depth = Intrinsics(f=f_unscaled, cx=k.cx * s, cy=k.cy * s, ref_w=ird[0], ref_h=ird[1])
    color = rescale_intrinsics(depth, DEPTH_WIDTH, DEPTH_HEIGHT)
    return CaptureMeta(
        device=spec.device,
        api=api,
        os_version=spec.os_version,
        lens_distortion_center=(depth.cx, depth.cy),
        intrinsic_reference_dimensions=ird,
        depth_intrinsics_unscaled=depth,
        color_intrinsics=color,
    )


def session_pair(spec: SceneSpec) -> SessionPair:
    """AV and ARKit metadata for the scene, mutated by the injected bug."""
    k = spec.true_intrinsics
    ird_av = spec.ird
    if abs(ird_av[0] * 3 - ird_av[1] * 4) > 0:
        raise ValueError(f"reference dimensions {ird_av} are not 4:3")
    s_av = ird_av[0] / DEPTH_WIDTH
    bug = spec.bug
    if bug.kind == "focal":
        f_av = k.f * bug.factor * s_av
        f_ar = k.f * bug.factor**2 * s_av
        ird_ar = ird_av
    elif bug.kind == "zoom":
        w_ar = 4 * round(ird_av[0] * bug.factor / 4)
        ird_ar = (w_ar, w_ar // 4 * 3)
        f_av = f_ar = k.f * s_av
    else:
        f_av = f_ar = k.f * s_av
        ird_ar = ird_av
    return SessionPair(
        av=_session_meta(spec, Api.AV, f_av, ird_av),
        ar=_session_meta(spec, Api.ARKIT, f_ar, ird_ar),
    )


# --------------------------------------------------------------------------
# rendering

def plane_depth(pose: Pose, k: Intrinsics, u, v) -> np.ndarray:
    """Depth of the board plane (extended infinitely) along pixel rays; NaN if missed."""
    normal = pose.rotation[:, 2]
    offset = normal @ pose.translation
    yn = (np.asarray(v, dtype=np.float64) - k.cy) / k.fy
    xn = (np.asarray(u, dtype=np.float64) - k.cx - k.skew * yn) / k.f
    denom = normal[0] * xn + normal[1] * yn + normal[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = offset / denom
    return np.where(np.isfinite(z) & (z > 0), z, np.nan)


def render_depth(spec: SceneSpec, pose: Pose, stretch: float = 1.0) -> np.ndarray:
    """Noise-free depth raster; ``stretch`` enlarges content about the principal point."""
    k = spec.true_intrinsics
    jj, ii = np.mgrid[0:DEPTH_HEIGHT, 0:DEPTH_WIDTH].astype(np.float64)
    if stretch != 1.0:
        ii = k.cx + (ii - k.cx) / stretch
        jj = k.cy + (jj - k.cy) / stretch
    return plane_depth(pose, k, ii, jj)


def render_rgb(spec: SceneSpec, pose: Pose) -> np.ndarray:
    """Flat grey checkerboard on a mid-grey background."""
    k = spec.true_intrinsics
    jj, ii = np.mgrid[0:DEPTH_HEIGHT, 0:DEPTH_WIDTH].astype(np.float64)
    z = plane_depth(pose, k, ii, jj)
    yn = (jj - k.cy) / k.fy
    xn = (ii - k.cx - k.skew * yn) / k.f
    cam = np.stack([xn * z, yn * z, z], axis=-1)
    board = (cam - pose.translation) @ pose.rotation
    sq = spec.square_size
    x0 = -(spec.board_cols + 1) / 2.0 * sq
    y0 = -(spec.board_rows + 1) / 2.0 * sq
    with np.errstate(invalid="ignore"):
        cx = np.floor((board[..., 0] - x0) / sq)
        cy = np.floor((board[..., 1] - y0) / sq)
        inside = (cx >= 0) & (cx <= spec.board_cols) & (cy >= 0) & (cy <= spec.board_rows)
    grey = np.full(z.shape, 128, dtype=np.uint8)
    parity = (np.nan_to_num(cx) + np.nan_to_num(cy)) % 2 == 0
    grey[inside & parity] = 30
    grey[inside & ~parity] = 225
    return np.repeat(grey[..., None], 3, axis=2)


def project_corners(spec: SceneSpec, pose: Pose) -> np.ndarray:
    cam = pose.apply(spec.board_points())
    if np.any(cam[:, 2] <= 0):
        raise DegenerateScene("board corners lie behind the camera")
    return denormalize_points(cam[:, :2] / cam[:, 2:3], spec.true_intrinsics)


def render_view(spec: SceneSpec, view_index: int, pair: SessionPair | None = None) -> CaptureBundle:
    """Render one capture bundle.  All randomness comes from (seed, view_index)."""
    if not 0 <= view_index < len(spec.poses):
        raise IndexError(f"view {view_index} out of range for {len(spec.poses)} poses")
    pose = spec.poses[view_index]
    if pose.translation[2] <= 0:
        raise DegenerateScene("board origin lies behind the camera")
    pixels = project_corners(spec, pose)
    if spec.corner_noise_sigma > 0:
        noise = stream(spec.rng_seed, view_index, "corners").normal(pixels.size)
        pixels = pixels + spec.corner_noise_sigma * noise.reshape(pixels.shape)
    inside = (
        (pixels[:, 0] >= 0) & (pixels[:, 0] <= DEPTH_WIDTH - 1)
        & (pixels[:, 1] >= 0) & (pixels[:, 1] <= DEPTH_HEIGHT - 1)
    )
    corners = Correspondences(spec.board_ids(), spec.board_points(), pixels).subset(inside)

    depth = None
    if spec.render_depth:
        stretch = spec.bug.factor if spec.bug.kind == "zoom" else 1.0
        values = render_depth(spec, pose, stretch)
        if spec.depth_noise_sigma > 0:
            noise = stream(spec.rng_seed, view_index, "depth").normal(values.size)
            values = values + spec.depth_noise_sigma * noise.reshape(values.shape)
            values[~(values > 0)] = np.nan
        depth = DepthMap(values)
    rgb = render_rgb(spec, pose) if spec.render_rgb else None
    pair = pair or session_pair(spec)
    meta = pair.av if spec.session is Api.AV else pair.ar
    return CaptureBundle(meta=meta, depth=depth, rgb=rgb, corners=corners, square_size=spec.square_size)


# --------------------------------------------------------------------------
# pose sampling

def look_at_pose(center, target=(0.0, 0.0, 0.0), roll: float = 0.0) -> Pose:
    """Pose of a camera at ``center`` (board frame) looking at ``target``."""
    c = np.asarray(center, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - c
    z /= np.linalg.norm(z)
    x = np.cross([0.0, 1.0, 0.0], z)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross([1.0, 0.0, 0.0], z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    r = np.vstack([x, y, z])
    r = rodrigues([0.0, 0.0, roll]) @ r
    return Pose(r, -r @ c)


def hemisphere_poses(
    count: int,
    seed: int,
    distance=(0.18, 0.3),
    max_tilt_deg: float = 40.0,
    max_roll_deg: float = 15.0,
    target_jitter: float = 0.01,
) -> list[Pose]:
    """Camera poses on a spherical cap over the board, looking at its centre."""
    u = stream(seed, "poses").uniform(6 * count).reshape(count, 6)
    cos_max = math.cos(math.radians(max_tilt_deg))
    poses = []
    for u1, u2, u3, u4, u5, u6 in u:
        cos_p = 1.0 - u1 * (1.0 - cos_max)
        sin_p = math.sqrt(max(0.0, 1.0 - cos_p * cos_p))
        az = 2.0 * math.pi * u2
        d = distance[0] + (distance[1] - distance[0]) * u3
        roll = math.radians(max_roll_deg) * (2.0 * u4 - 1.0)
        target = (target_jitter * (2 * u5 - 1), target_jitter * (2 * u6 - 1), 0.0)
        center = d * np.array([sin_p * math.cos(az), sin_p * math.sin(az), -cos_p])
        poses.append(look_at_pose(center, target, roll))
    return poses


# --------------------------------------------------------------------------
# scene.json

def scene_from_dict(doc: dict) -> SceneSpec:
    """Build a scene from its JSON description (see README for the schema)."""
    try:
        board = doc["board"]
        intr = doc["intrinsics"]
        k = Intrinsics(
            f=float(intr["f"]), cx=float(intr.get("cx", 319.5)), cy=float(intr.get("cy", 239.5))
        )
        seed = int(doc.get("seed", 0))
        poses_doc = doc["poses"]
        if isinstance(poses_doc, dict):
            hemi = poses_doc["hemisphere"]
            poses = hemisphere_poses(
                int(hemi["count"]),
                seed,
                tuple(hemi.get("distance_m", (0.18, 0.3))),
                float(hemi.get("max_tilt_deg", 40.0)),
                float(hemi.get("max_roll_deg", 15.0)),
            )
        else:
            poses = [Pose.from_rvec(p["rvec"], p["t"]) for p in poses_doc]
        noise = doc.get("noise", {})
        bug = doc.get("bug", {})
        render = doc.get("render", {})
        return SceneSpec(
            board_cols=int(board["cols"]),
            board_rows=int(board["rows"]),
            square_size=float(board["square_size"]),
            true_intrinsics=k,
            poses=poses,
            corner_noise_sigma=float(noise.get("corner_px", 0.0)),
            depth_noise_sigma=float(noise.get("depth_m", 0.0)),
            bug=BugSpec(bug.get("kind", "none"), float(bug.get("factor", 1.0))),
            rng_seed=seed,
            ird=tuple(doc.get("ird", DEFAULT_IRD)),
            device=str(doc.get("device", "synthetic")),
            os_version=str(doc.get("os_version", "sim")),
            render_depth=bool(render.get("depth", True)),
            render_rgb=bool(render.get("rgb", True)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid scene description: missing or malformed {exc}") from None


def load_scene(path) -> SceneSpec:
    return scene_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def view_dir_name(index: int) -> str:
    return f"view_{index:03d}"


def generate_dataset(spec: SceneSpec, out_dir, threads: int = 1) -> Path:
    """Write every view of ``spec`` plus the session metadata under ``out_dir``.

    Layout: ``meta_av.json``, ``meta_ar.json``, ``meta.json`` (the capture
    session), ``board.json`` and one bundle directory per view.  Output
    bytes depend only on ``spec``, never on ``threads``.
    """
    if len(spec.poses) < 1:
        raise ValueError("scene has no poses")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pair = session_pair(spec)
    (out / "meta_av.json").write_text(serialize_meta(pair.av), encoding="utf-8")
    (out / "meta_ar.json").write_text(serialize_meta(pair.ar), encoding="utf-8")
    capture = pair.av if spec.session is Api.AV else pair.ar
    (out / "meta.json").write_text(serialize_meta(capture), encoding="utf-8")
    (out / BOARD).write_text(
        encode_board(spec.board_ids(), spec.board_points(), spec.square_size), encoding="utf-8"
    )

    def work(i):
        save_bundle(render_view(spec, i, pair), out / view_dir_name(i))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(spec.poses))))
    else:
        for i in range(len(spec.poses)):
            work(i)
    return out


def generate_calibration_dataset(spec: SceneSpec, out_dir, threads: int = 1) -> Path:
    if len(spec.poses) < 3:
        raise ValueError("a calibration dataset needs at least 3 poses")
    return generate_dataset(spec, out_dir, threads)


def frontal_pose(distance: float) -> Pose:
    return Pose(np.eye(3), [0.0, 0.0, distance])


def with_poses(spec: SceneSpec, poses) -> SceneSpec:
    return replace(spec, poses=tuple(poses))
