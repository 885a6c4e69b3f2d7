"""Audit, correct and verify TrueDepth camera metadata from iPad and iPhone captures."""

__version__ = "0.1.0"

from .audit import AuditReport, AuditVerdict, IssueClass, audit_report, classify
from .calibration import CalibrationResult, CalibrationView, calibrate_focal, focal_discrepancy, select_views
from .camera import DepthMap, Intrinsics, project, rescale_intrinsics, sample_bilinear, unproject
from .correction import ZoomFactors, correct_focal_ar, correct_focal_av, zoom_depth_map, zoom_factors
from .distortion import RadialLut, detect_residual_distortion, warp_image, warp_point
from .metadata import Api, CaptureMeta, SessionPair, fixture_database, meta_ratios, parse_meta
from .pose import Correspondences, Pose, estimate_homography, solve_pnp
from .verification import DepthErrorReport, emit_histogram, render_overlay, verify_depth

__all__ = [
    "Api",
    "AuditReport",
    "AuditVerdict",
    "CalibrationResult",
    "CalibrationView",
    "CaptureMeta",
    "Correspondences",
    "DepthErrorReport",
    "DepthMap",
    "Intrinsics",
    "IssueClass",
    "Pose",
    "RadialLut",
    "SessionPair",
    "ZoomFactors",
    "audit_report",
    "calibrate_focal",
    "classify",
    "correct_focal_ar",
    "correct_focal_av",
    "detect_residual_distortion",
    "emit_histogram",
    "estimate_homography",
    "fixture_database",
    "focal_discrepancy",
    "meta_ratios",
    "parse_meta",
    "project",
    "render_overlay",
    "rescale_intrinsics",
    "sample_bilinear",
    "select_views",
    "solve_pnp",
    "unproject",
    "verify_depth",
    "warp_image",
    "warp_point",
    "zoom_depth_map",
    "zoom_factors",
]
