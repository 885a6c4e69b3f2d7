"""Classify AV/ARKit metadata pairs into the known iPad issue classes."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .correction import corrected_focals, zoom_factors
from .errors import EmptyReport
from .metadata import SessionPair, meta_ratios, percent

SCHEMA_VERSION = 1
DEFAULT_DEPTH_THRESHOLD = 1.0  # percent
DEFAULT_IRD_THRESHOLD = 1.0  # percent


class IssueClass(str, Enum):
    HEALTHY = "Healthy"
    ZOOM_MISALIGNMENT = "ZoomMisalignment"
    WRONG_FOCAL = "WrongFocal"


@dataclass(frozen=True)
class AuditVerdict:
    device: str
    os_version: str
    issue: IssueClass
    depth_intrinsics_diff: float
    ird_diff: float
    recommended_zoom: tuple[float, float] | None = None
    recommended_focal_av: float | None = None
    recommended_focal_ar: float | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        has_zoom = self.recommended_zoom is not None
        has_focal = self.recommended_focal_av is not None and self.recommended_focal_ar is not None
        ok = {
            IssueClass.HEALTHY: not has_zoom and self.recommended_focal_av is None,
            IssueClass.ZOOM_MISALIGNMENT: has_zoom,
            IssueClass.WRONG_FOCAL: has_focal,
        }[self.issue]
        if not ok:
            raise ValueError(f"recommendations inconsistent with verdict {self.issue.value}")

    @property
    def has_issue(self) -> bool:
        return self.issue is not IssueClass.HEALTHY

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "os_version": self.os_version,
            "class": self.issue.value,
            "depth_intrinsics_diff_percent": self.depth_intrinsics_diff,
            "ird_diff_percent": self.ird_diff,
            "recommended_zoom": list(self.recommended_zoom) if self.recommended_zoom else None,
            "recommended_focal_av_vga": self.recommended_focal_av,
            "recommended_focal_ar_vga": self.recommended_focal_ar,
            "notes": list(self.notes),
        }


def classify(
    pair: SessionPair,
    depth_threshold: float = DEFAULT_DEPTH_THRESHOLD,
    ird_threshold: float = DEFAULT_IRD_THRESHOLD,
) -> AuditVerdict:
    """Apply the decision rule; a focal discrepancy outranks an IRD mismatch."""
    depth_ratio, ird_w_ratio, _ = meta_ratios(pair)
    depth_diff = abs(percent(depth_ratio))
    ird_diff = abs(percent(ird_w_ratio))
    common = dict(
        device=pair.device,
        os_version=pair.av.os_version,
        depth_intrinsics_diff=depth_diff,
        ird_diff=ird_diff,
    )
    if depth_diff >= depth_threshold:
        focals = corrected_focals(pair)
        notes = [
            f"depth focal differs by {depth_diff:.2f}% between sessions; "
            "use the corrected focal lengths",
        ]
        if ird_diff >= ird_threshold:
            notes.append(
                f"reference dimensions also differ by {ird_diff:.1f}%; "
                "WrongFocal takes precedence over ZoomMisalignment"
            )
        return AuditVerdict(
            issue=IssueClass.WRONG_FOCAL,
            recommended_focal_av=focals["av"][1],
            recommended_focal_ar=focals["ar"][1],
            notes=tuple(notes),
            **common,
        )
    if ird_diff >= ird_threshold:
        z = zoom_factors(pair)
        return AuditVerdict(
            issue=IssueClass.ZOOM_MISALIGNMENT,
            recommended_zoom=(z.zx, z.zy),
            notes=(f"ARKit depth is misaligned; zoom about the principal point by ({z.zx:.5f}, {z.zy:.5f})",),
            **common,
        )
    return AuditVerdict(issue=IssueClass.HEALTHY, **common)


@dataclass(frozen=True)
class AuditReport:
    verdicts: tuple[AuditVerdict, ...]

    @property
    def counts(self) -> dict[str, int]:
        tally = Counter(v.issue for v in self.verdicts)
        return {c.value: tally.get(c, 0) for c in IssueClass}

    @property
    def has_issues(self) -> bool:
        return any(v.has_issue for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "counts": self.counts,
            "recommendations": sum(v.has_issue for v in self.verdicts),
            "verdicts": [v.to_dict() for v in self.verdicts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = []
        for v in self.verdicts:
            line = (
                f"{v.device} [{v.os_version}]: {v.issue.value} "
                f"(depth {v.depth_intrinsics_diff:.2f}%, IRD {v.ird_diff:.1f}%)"
            )
            if v.recommended_zoom:
                line += f" zoom=({v.recommended_zoom[0]:.5f}, {v.recommended_zoom[1]:.5f})"
            if v.recommended_focal_av is not None:
                line += (
                    f" f_av={v.recommended_focal_av:.2f}px f_ar={v.recommended_focal_ar:.2f}px"
                )
            lines.append(line)
        counts = ", ".join(f"{k}={n}" for k, n in self.counts.items())
        lines.append(f"summary: {counts}")
        return "\n".join(lines) + "\n"


def audit_report(verdicts) -> AuditReport:
    verdicts = tuple(verdicts)
    if not verdicts:
        raise EmptyReport("no verdicts to report")
    return AuditReport(verdicts)
