"""Focal-length-only multi-view calibration with voxel-grid view selection.

Aspect ratio, skew and principal point stay at the initial guess and the
model is distortion-free.  Focal length and every view pose are refined
jointly by one LM problem over ``1 + 6 N`` parameters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import Intrinsics
from .errors import DomainError, IllConditioned, NoUsableViews
from .optim import levenberg_marquardt
from .pose import Correspondences, Pose, project_normalized, solve_pnp, wrap_rvec

MIN_CORNERS = 10
MIN_VIEWS = 3
DEFAULT_VOXEL_SIZE = 0.03  # metres, board frame
CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class CalibrationView:
    corners: Correspondences
    camera_center_estimate: np.ndarray | None = None
    accepted: bool | None = None
    name: str = ""

    def __post_init__(self):
        enough = len(self.corners) >= MIN_CORNERS
        if self.accepted is None:
            object.__setattr__(self, "accepted", enough)
        elif self.accepted and not enough:
            raise ValueError(f"an accepted view needs >= {MIN_CORNERS} corners")
        if self.camera_center_estimate is not None:
            c = np.array(self.camera_center_estimate, dtype=np.float64).reshape(3)
            object.__setattr__(self, "camera_center_estimate", c)


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    f: float
    intrinsics: Intrinsics
    per_view_poses: list
    rms_reproj: float
    views_used: int
    views_rejected_corners: int = 0
    views_rejected_voxel: int = 0
    iterations: int = 0
    status: str = ""
    condition: float = float("nan")
    ill_conditioned: bool = False
    cost_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "f": self.f,
            "intrinsics": {
                "f": self.intrinsics.f,
                "cx": self.intrinsics.cx,
                "cy": self.intrinsics.cy,
                "aspect": self.intrinsics.aspect,
                "skew": self.intrinsics.skew,
                "ref_w": self.intrinsics.ref_w,
                "ref_h": self.intrinsics.ref_h,
            },
            "rms_reproj_px": self.rms_reproj,
            "views_used": self.views_used,
            "views_rejected_corners": self.views_rejected_corners,
            "views_rejected_voxel": self.views_rejected_voxel,
            "iterations": self.iterations,
            "status": self.status,
            "condition_estimate": self.condition,
            "ill_conditioned": self.ill_conditioned,
        }


def estimate_camera_centers(views, k: Intrinsics) -> list[CalibrationView]:
    """Fill camera centres (board frame) from a per-view PnP with ``k``."""
    out = []
    for v in views:
        if len(v.corners) < 4:
            out.append(v)
            continue
        pose, _ = solve_pnp(v.corners, k)
        out.append(replace(v, camera_center_estimate=pose.camera_center))
    return out


def voxel_key(center, voxel_size: float) -> tuple[int, int, int]:
    return tuple(int(math.floor(c / voxel_size)) for c in center)


def select_views(views, voxel_size: float = DEFAULT_VOXEL_SIZE) -> list[CalibrationView]:
    """Drop views with too few corners, then keep the first view per occupied voxel."""
    if voxel_size <= 0:
        raise ValueError("voxel size must be positive")
    seen = set()
    kept = []
    for v in views:
        if len(v.corners) < MIN_CORNERS:
            continue
        if v.camera_center_estimate is None:
            raise ValueError("view lacks a camera centre estimate")
        key = voxel_key(v.camera_center_estimate, voxel_size)
        if key in seen:
            continue
        seen.add(key)
        kept.append(v)
    if not kept:
        raise NoUsableViews("no view survived corner-count and voxel filtering")
    return kept


class _FocalProblem:
    def __init__(self, views, k: Intrinsics):
        self.k = k
        self.boards = [v.corners.board for v in views]
        self.targets = [v.corners.pixels for v in views]
        self.n_points = sum(len(b) for b in self.boards)

    def _view_terms(self, x, i):
        f = x[0]
        p = x[1 + 6 * i : 7 + 6 * i]
        xy, jac = project_normalized(p[:3], p[3:], self.boards[i])
        k = self.k
        res = np.column_stack(
            [f * xy[:, 0] + k.skew * xy[:, 1] + k.cx, f * k.aspect * xy[:, 1] + k.cy]
        ) - self.targets[i]
        jf = np.column_stack([xy[:, 0], k.aspect * xy[:, 1]])
        jp = jac.copy()
        jp[:, 0, :] = f * jac[:, 0, :] + k.skew * jac[:, 1, :]
        jp[:, 1, :] *= f * k.aspect
        return res, jf, jp

    def cost(self, x) -> float:
        total = 0.0
        for i in range(len(self.boards)):
            f = x[0]
            p = x[1 + 6 * i : 7 + 6 * i]
            xy, _ = project_normalized(p[:3], p[3:], self.boards[i])
            k = self.k
            res = np.column_stack(
                [f * xy[:, 0] + k.skew * xy[:, 1] + k.cx, f * k.aspect * xy[:, 1] + k.cy]
            ) - self.targets[i]
            total += float(np.sum(res * res))
        return total

    def linearize(self, x):
        n = x.size
        h = np.zeros((n, n))
        g = np.zeros(n)
        total = 0.0
        # fixed view order keeps the reduction deterministic
        for i in range(len(self.boards)):
            res, jf, jp = self._view_terms(x, i)
            r = res.reshape(-1)
            jf = jf.reshape(-1)
            jp = jp.reshape(-1, 6)
            sl = slice(1 + 6 * i, 7 + 6 * i)
            total += float(r @ r)
            g[0] += jf @ r
            g[sl] = jp.T @ r
            h[0, 0] += jf @ jf
            cross = jf @ jp
            h[0, sl] = cross
            h[sl, 0] = cross
            h[sl, sl] = jp.T @ jp
        return total, g, h

    def normalize(self, x):
        out = x.copy()
        for i in range(len(self.boards)):
            out[1 + 6 * i : 4 + 6 * i] = wrap_rvec(x[1 + 6 * i : 4 + 6 * i])
        return out


def scaled_condition(jtj) -> float:
    d = np.sqrt(np.diag(jtj))
    if np.any(d == 0):
        return float("inf")
    return float(np.linalg.cond(jtj / np.outer(d, d)))


def calibrate_focal(views, k_init: Intrinsics) -> CalibrationResult:
    """Jointly refine the focal length and all view poses."""
    views = list(views)
    usable = [v for v in views if len(v.corners) >= MIN_CORNERS]
    rejected = len(views) - len(usable)
    if len(usable) < MIN_VIEWS:
        raise NoUsableViews(f"need >= {MIN_VIEWS} views with >= {MIN_CORNERS} corners, got {len(usable)}")
    init_poses = [solve_pnp(v.corners, k_init)[0] for v in usable]
    x0 = np.concatenate([[k_init.f]] + [np.concatenate([p.rvec, p.translation]) for p in init_poses])
    problem = _FocalProblem(usable, k_init)
    result = levenberg_marquardt(
        problem.linearize, problem.cost, x0, normalize=problem.normalize
    )
    f = float(result.x[0])
    if not f > 0:
        raise DomainError(f"calibration produced a non-positive focal length {f}")
    poses = [Pose.from_rvec(result.x[1 + 6 * i : 4 + 6 * i], result.x[4 + 6 * i : 7 + 6 * i]) for i in range(len(usable))]
    cond = scaled_condition(result.jtj)
    ill = not cond < CONDITION_LIMIT
    if ill:
        warnings.warn(f"normal equations condition estimate {cond:.3g} exceeds {CONDITION_LIMIT:g}", IllConditioned)
    return CalibrationResult(
        f=f,
        intrinsics=k_init.with_focal(f),
        per_view_poses=poses,
        rms_reproj=math.sqrt(result.cost / problem.n_points),
        views_used=len(usable),
        views_rejected_corners=rejected,
        iterations=result.iterations,
        status=result.status,
        condition=cond,
        ill_conditioned=ill,
        cost_history=result.cost_history,
    )


def calibrate_dataset(views, k_init: Intrinsics, voxel_size: float = DEFAULT_VOXEL_SIZE) -> CalibrationResult:
    """Corner-count filter, PnP camera centres, voxel selection, then calibration."""
    views = list(views)
    enough = [v for v in views if len(v.corners) >= MIN_CORNERS]
    with_centres = estimate_camera_centers(enough, k_init)
    selected = select_views(with_centres, voxel_size) if with_centres else []
    if not selected:
        raise NoUsableViews("no usable views")
    result = calibrate_focal(selected, k_init)
    return replace(
        result,
        views_rejected_corners=len(views) - len(enough),
        views_rejected_voxel=len(enough) - len(selected),
    )


def focal_discrepancy(f_factory: float, f_calibrated: float) -> float:
    """Percent deviation of the calibrated focal from the factory one."""
    if not (f_factory > 0 and f_calibrated > 0):
        raise DomainError("focal lengths must be positive")
    return 100.0 * abs(f_factory - f_calibrated) / f_factory
