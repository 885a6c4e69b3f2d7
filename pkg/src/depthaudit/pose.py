"""Planar perspective-n-point: homography initialisation plus LM refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics
from .errors import DegenerateConfiguration, InsufficientPoints
from .optim import levenberg_marquardt

PLANAR_TOL = 1e-12


# --------------------------------------------------------------------------
# rotations

def skew(w) -> np.ndarray:
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(rvec) -> np.ndarray:
    """Axis-angle vector to rotation matrix."""
    w = np.asarray(rvec, dtype=np.float64)
    theta = np.linalg.norm(w)
    k = skew(w)
    if theta < 1e-8:
        return np.eye(3) + k + 0.5 * k @ k
    return np.eye(3) + (np.sin(theta) / theta) * k + ((1.0 - np.cos(theta)) / theta**2) * k @ k


def log_rotation(r) -> np.ndarray:
    """Rotation matrix to axis-angle vector with angle in [0, pi]."""
    r = np.asarray(r, dtype=np.float64)
    vee = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / 2.0
    theta = np.arctan2(np.linalg.norm(vee), (np.trace(r) - 1.0) / 2.0)
    if theta < 1e-6:
        return vee * (1.0 + theta**2 / 6.0)
    if np.pi - theta > 1e-4:
        return vee * (theta / np.sin(theta))
    # near pi the antisymmetric part vanishes; read the axis from R + I
    b = (r + np.eye(3)) / 2.0
    col = int(np.argmax(np.diag(b)))
    axis = b[:, col] / np.sqrt(b[col, col])
    if axis @ vee < 0:
        axis = -axis
    return axis * theta


def wrap_rvec(rvec) -> np.ndarray:
    """Equivalent axis-angle vector with norm <= pi."""
    w = np.asarray(rvec, dtype=np.float64)
    theta = np.linalg.norm(w)
    if theta <= np.pi:
        return w
    turns = np.floor((theta + np.pi) / (2.0 * np.pi))
    return w * (1.0 - 2.0 * np.pi * turns / theta)


def rotation_jacobians(rvec) -> np.ndarray:
    """dR/dw_i for i = 0..2, shape (3, 3, 3) indexed [i]."""
    w = np.asarray(rvec, dtype=np.float64)
    theta2 = w @ w
    basis = np.eye(3)
    if theta2 < 1e-16:
        return np.stack([skew(e) for e in basis])
    r = rodrigues(w)
    wx = skew(w)
    i_minus_r = np.eye(3) - r
    return np.stack(
        [(w[i] * wx + skew(np.cross(w, i_minus_r @ basis[i]))) @ r / theta2 for i in range(3)]
    )


def nearest_rotation(m) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_angle(r) -> float:
    """Rotation angle of ``r``; atan2 keeps precision near zero."""
    r = np.asarray(r, dtype=np.float64)
    vee = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / 2.0
    return float(np.arctan2(np.linalg.norm(vee), (np.trace(r) - 1.0) / 2.0))


# --------------------------------------------------------------------------
# pose and correspondences

@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform taking board coordinates to camera coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_rvec(cls, rvec, tvec) -> "Pose":
        return cls(rodrigues(rvec), tvec)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def rvec(self) -> np.ndarray:
        return log_rotation(self.rotation)

    @property
    def camera_center(self) -> np.ndarray:
        """Camera position in board coordinates."""
        return -self.rotation.T @ self.translation

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def is_orthonormal(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return bool(
            np.max(np.abs(r.T @ r - np.eye(3))) < tol and abs(np.linalg.det(r) - 1.0) < tol
        )


def pose_error(estimate: Pose, truth: Pose) -> tuple[float, float]:
    """(rotation error in radians, translation error in metres)."""
    rot = rotation_angle(estimate.rotation @ truth.rotation.T)
    return rot, float(np.linalg.norm(estimate.translation - truth.translation))


@dataclass(frozen=True)
class Correspondence:
    id: int
    board_point: tuple[float, float, float]
    pixel: tuple[float, float]


@dataclass(frozen=True, eq=False)
class Correspondences:
    """Column-wise corner set: ids (N,), board points (N, 3), pixels (N, 2)."""

    ids: np.ndarray
    board: np.ndarray
    pixels: np.ndarray

    def __post_init__(self):
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        board = np.array(self.board, dtype=np.float64).reshape(-1, 3)
        pixels = np.array(self.pixels, dtype=np.float64).reshape(-1, 2)
        if not (len(ids) == len(board) == len(pixels)):
            raise ValueError("ids, board points and pixels differ in length")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("corner ids must be unique within a view")
        for a in (ids, board, pixels):
            a.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "board", board)
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_records(cls, records) -> "Correspondences":
        records = list(records)
        return cls(
            [r.id for r in records],
            [r.board_point for r in records],
            [r.pixel for r in records],
        )

    def records(self) -> list[Correspondence]:
        return [
            Correspondence(int(i), tuple(b), tuple(p))
            for i, b, p in zip(self.ids, self.board, self.pixels)
        ]

    def subset(self, mask) -> "Correspondences":
        return Correspondences(self.ids[mask], self.board[mask], self.pixels[mask])

    def with_pixels(self, pixels) -> "Correspondences":
        return Correspondences(self.ids, self.board, pixels)

    def __len__(self) -> int:
        return len(self.ids)


# --------------------------------------------------------------------------
# normalisation and homography

def normalize_points(pixels, k: Intrinsics) -> np.ndarray:
    """Pixels to ideal image-plane coordinates (inverse of K, skew-aware)."""
    uv = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    yn = (uv[:, 1] - k.cy) / k.fy
    xn = (uv[:, 0] - k.cx - k.skew * yn) / k.f
    return np.column_stack([xn, yn])


def denormalize_points(xy, k: Intrinsics) -> np.ndarray:
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    u = k.f * xy[:, 0] + k.skew * xy[:, 1] + k.cx
    v = k.fy * xy[:, 1] + k.cy
    return np.column_stack([u, v])


def _hartley(pts):
    centroid = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    if mean_dist == 0:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


def estimate_homography(board_xy, image_xy) -> np.ndarray:
    """DLT homography taking board-plane (x, y) to image points; ||H||_F = 1."""
    src = np.asarray(board_xy, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(image_xy, dtype=np.float64).reshape(-1, 2)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise InsufficientPoints(f"homography needs >= 4 correspondences, got {n}")
    ts, td = _hartley(src), _hartley(dst)
    s = src @ ts[:2, :2].T + ts[:2, 2]
    d = dst @ td[:2, :2].T + td[:2, 2]
    a = np.zeros((max(2 * n, 9), 9))
    x, y, u, v = s[:, 0], s[:, 1], d[:, 0], d[:, 1]
    one, zero = np.ones(n), np.zeros(n)
    a[0 : 2 * n : 2] = np.column_stack([-x, -y, -one, zero, zero, zero, u * x, u * y, u])
    a[1 : 2 * n : 2] = np.column_stack([zero, zero, zero, -x, -y, -one, v * x, v * y, v])
    _, sv, vt = np.linalg.svd(a)
    if sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("homography system is rank deficient (collinear points?)")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    return h / np.linalg.norm(h)


def apply_homography(h, xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    p = xy @ h[:, :2].T + h[:, 2]
    return p[:, :2] / p[:, 2:3]


def pose_from_homography(h) -> Pose:
    """Decompose a calibrated-plane homography into a board-to-camera pose."""
    h = np.asarray(h, dtype=np.float64)
    n1 = np.linalg.norm(h[:, 0])
    if not n1 > 0 or not np.isfinite(n1):
        raise DegenerateConfiguration("first homography column has zero norm")
    lam = 1.0 / n1
    r1, r2, t = lam * h[:, 0], lam * h[:, 1], lam * h[:, 2]
    if t[2] < 0:
        r1, r2, t = -r1, -r2, -t
    if not t[2] > 0:
        raise DegenerateConfiguration("board is not in front of the camera under either sign")
    r = nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return Pose(r, t)


# --------------------------------------------------------------------------
# refinement

def project_normalized(rvec, tvec, board) -> tuple[np.ndarray, np.ndarray]:
    """Ideal projections of board points and their Jacobian wrt [rvec, tvec].

    Returns ``(xy (N, 2), J (N, 2, 6))``.
    """
    r = rodrigues(rvec)
    xc = board @ r.T + tvec
    z = xc[:, 2]
    inv_z = 1.0 / z
    xy = xc[:, :2] * inv_z[:, None]
    # d(xy)/d(xc)
    dp = np.zeros((len(board), 2, 3))
    dp[:, 0, 0] = inv_z
    dp[:, 1, 1] = inv_z
    dp[:, 0, 2] = -xc[:, 0] * inv_z**2
    dp[:, 1, 2] = -xc[:, 1] * inv_z**2
    dr = rotation_jacobians(rvec)  # (3, 3, 3)
    dxc_dw = np.einsum("iab,nb->nai", dr, board)  # (N, 3, 3)
    jac = np.empty((len(board), 2, 6))
    jac[:, :, :3] = dp @ dxc_dw
    jac[:, :, 3:] = dp
    return xy, jac


def _pose_problem(board, target):
    def cost(x):
        r = rodrigues(x[:3])
        xc = board @ r.T + x[3:]
        res = xc[:, :2] / xc[:, 2:3] - target
        return float(np.sum(res * res))

    def linearize(x):
        xy, jac = project_normalized(x[:3], x[3:], board)
        res = (xy - target).reshape(-1)
        j = jac.reshape(-1, 6)
        return float(res @ res), j.T @ res, j.T @ j

    return cost, linearize


def _normalize_pose_params(x):
    out = x.copy()
    out[:3] = wrap_rvec(x[:3])
    return out


def refine_pose_lm(board, normalized, init: Pose) -> tuple[Pose, float]:
    """Minimise ideal-plane reprojection error over axis-angle and translation.

    Returns the refined pose and the RMS residual in normalised units.
    """
    board = np.asarray(board, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(normalized, dtype=np.float64).reshape(-1, 2)
    if len(board) < 4:
        raise InsufficientPoints(f"pose refinement needs >= 4 points, got {len(board)}")
    x0 = np.concatenate([init.rvec, init.translation])
    cost, linearize = _pose_problem(board, target)
    result = levenberg_marquardt(linearize, cost, x0, normalize=_normalize_pose_params)
    pose = Pose.from_rvec(result.x[:3], result.x[3:])
    rms = float(np.sqrt(result.cost / len(board)))
    return pose, rms


def _plane_frame(board) -> Pose | None:
    """Rigid map from board coordinates onto a z == 0 plane, or None if already planar."""
    if np.max(np.abs(board[:, 2])) <= PLANAR_TOL:
        return None
    centroid = board.mean(axis=0)
    _, s, vt = np.linalg.svd(board - centroid)
    if s[2] > 1e-9 * s[0]:
        raise DegenerateConfiguration("board points are not coplanar")
    if np.linalg.det(vt) < 0:
        vt[2] = -vt[2]
    return Pose(vt, -vt @ centroid)


def initial_pose(board, normalized) -> Pose:
    board = np.asarray(board, dtype=np.float64).reshape(-1, 3)
    frame = _plane_frame(board)
    local = board if frame is None else frame.apply(board)
    h = estimate_homography(local[:, :2], normalized)
    pose = pose_from_homography(h)
    return pose if frame is None else pose.compose(frame)


def solve_pnp(corrs: Correspondences, k: Intrinsics) -> tuple[Pose, float]:
    """Board-to-camera pose from planar corner correspondences.

    Returns the pose and the RMS reprojection error in pixels.
    """
    if len(corrs) < 4:
        raise InsufficientPoints(f"PnP needs >= 4 correspondences, got {len(corrs)}")
    normalized = normalize_points(corrs.pixels, k)
    init = initial_pose(corrs.board, normalized)
    pose, rms = refine_pose_lm(corrs.board, normalized, init)
    return pose, rms * k.f
