"""Capture metadata records: schema, parsing, validation and the device fixtures.

A ``meta.json`` document looks like::

    {
      "device": "iPad 12.9'' 5gen",
      "api": "av",                               # or "arkit"
      "os_version": "iOS14",
      "lens_distortion_center": [1009.73, 759.42],
      "intrinsic_reference_dimensions": [2016, 1512],
      "depth_intrinsics_unscaled": {"fx": 1781.78, "fy": 1781.78, "cx": 1009.89, "cy": 759.69},
      "color_intrinsics": {"fx": 565.64, "fy": 565.64, "cx": 320.53, "cy": 242.10,
                           "ref_w": 640, "ref_h": 480},
      "distortion_lut": [...],                   # optional
      "inverse_distortion_lut": [...]            # optional
    }

Optional ``ultra_wide`` (bool) exempts an AV record from the rule that the
lens distortion centre equals the principal point.  Any other key is kept
verbatim in :attr:`CaptureMeta.extras` and written back on serialisation.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .camera import Intrinsics
from .distortion import RadialLut
from .errors import BadType, InvariantViolation, MissingField

FIXTURES_ENV = "DEPTHAUDIT_FIXTURES"
LDC_TOLERANCE_PX = 0.01
UNIT_TOLERANCE = 1e-9


class Api(str, Enum):
    AV = "av"
    ARKIT = "arkit"


KNOWN_KEYS = (
    "device",
    "api",
    "os_version",
    "lens_distortion_center",
    "intrinsic_reference_dimensions",
    "depth_intrinsics_unscaled",
    "color_intrinsics",
    "distortion_lut",
    "inverse_distortion_lut",
    "ultra_wide",
)


@dataclass(frozen=True)
class CaptureMeta:
    device: str
    api: Api
    os_version: str
    lens_distortion_center: tuple[float, float]
    intrinsic_reference_dimensions: tuple[int, int]
    depth_intrinsics_unscaled: Intrinsics
    color_intrinsics: Intrinsics
    forward_lut: RadialLut | None = None
    inverse_lut: RadialLut | None = None
    ultra_wide: bool = False
    extras: dict = field(default_factory=dict, compare=True)

    @property
    def depth_f(self) -> float:
        return self.depth_intrinsics_unscaled.f

    @property
    def ird(self) -> tuple[int, int]:
        return self.intrinsic_reference_dimensions


@dataclass(frozen=True)
class SessionPair:
    av: CaptureMeta
    ar: CaptureMeta

    def __post_init__(self):
        if self.av.api is not Api.AV:
            raise InvariantViolation("api", "first session of a pair must be av")
        if self.ar.api is not Api.ARKIT:
            raise InvariantViolation("api", "second session of a pair must be arkit")
        if self.av.device != self.ar.device:
            raise InvariantViolation(
                "device", f"pair mixes devices {self.av.device!r} and {self.ar.device!r}"
            )

    @property
    def device(self) -> str:
        return self.av.device


# --------------------------------------------------------------------------
# parsing

def _require(doc: dict, key: str):
    if key not in doc:
        raise MissingField(key)
    return doc[key]


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadType(name, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise BadType(name, "expected a finite number")
    return float(value)


def _integer(value, name: str) -> int:
    v = _number(value, name)
    if v != int(v):
        raise BadType(name, "expected an integer")
    return int(v)


def _pair(value, name: str, conv=_number) -> tuple:
    if not isinstance(value, list) or len(value) != 2:
        raise BadType(name, "expected a 2-element array")
    return conv(value[0], f"{name}[0]"), conv(value[1], f"{name}[1]")


def _intrinsics(obj, name: str, ref_w: int | None, ref_h: int | None) -> Intrinsics:
    if not isinstance(obj, dict):
        raise BadType(name, "expected an object")
    vals = {}
    for key in ("fx", "fy", "cx", "cy"):
        if key not in obj:
            raise MissingField(f"{name}.{key}")
        vals[key] = _number(obj[key], f"{name}.{key}")
    if ref_w is None:
        for key in ("ref_w", "ref_h"):
            if key not in obj:
                raise MissingField(f"{name}.{key}")
        ref_w = _integer(obj["ref_w"], f"{name}.ref_w")
        ref_h = _integer(obj["ref_h"], f"{name}.ref_h")
    skew = _number(obj.get("skew", 0.0), f"{name}.skew")
    if vals["fx"] <= 0:
        raise InvariantViolation(f"{name}.fx", "focal length must be positive")
    aspect = vals["fy"] / vals["fx"]
    try:
        return Intrinsics(
            f=vals["fx"], cx=vals["cx"], cy=vals["cy"], ref_w=ref_w, ref_h=ref_h,
            aspect=aspect, skew=skew,
        )
    except ValueError as exc:
        raise InvariantViolation(name, str(exc)) from None


def _lut(value, name: str, center, ird) -> RadialLut | None:
    if value is None:
        return None
    if not isinstance(value, list):
        raise BadType(name, "expected an array of numbers")
    entries = [_number(v, f"{name}[{i}]") for i, v in enumerate(value)]
    if len(entries) < 2:
        raise InvariantViolation(name, "a lookup table needs at least 2 entries")
    return RadialLut(entries, center, ird[0], ird[1])


def meta_from_dict(doc) -> CaptureMeta:
    if not isinstance(doc, dict):
        raise BadType("<document>", "expected a JSON object")
    device = _require(doc, "device")
    if not isinstance(device, str):
        raise BadType("device", "expected a string")
    api_raw = _require(doc, "api")
    try:
        api = Api(api_raw)
    except ValueError:
        raise BadType("api", f"expected 'av' or 'arkit', got {api_raw!r}") from None
    os_version = _require(doc, "os_version")
    if not isinstance(os_version, str):
        raise BadType("os_version", "expected a string")
    ldc = _pair(_require(doc, "lens_distortion_center"), "lens_distortion_center")
    ird = _pair(
        _require(doc, "intrinsic_reference_dimensions"), "intrinsic_reference_dimensions", _integer
    )
    if ird[0] <= 0 or ird[1] <= 0:
        raise InvariantViolation("intrinsic_reference_dimensions", "must be positive")
    depth = _intrinsics(
        _require(doc, "depth_intrinsics_unscaled"), "depth_intrinsics_unscaled", ird[0], ird[1]
    )
    color = _intrinsics(_require(doc, "color_intrinsics"), "color_intrinsics", None, None)
    ultra_wide = doc.get("ultra_wide", False)
    if not isinstance(ultra_wide, bool):
        raise BadType("ultra_wide", "expected a boolean")

    if abs(depth.aspect - 1.0) > UNIT_TOLERANCE:
        raise InvariantViolation("depth_intrinsics_unscaled.fy", "aspect ratio must be 1")
    if abs(depth.skew) > UNIT_TOLERANCE:
        raise InvariantViolation("depth_intrinsics_unscaled.skew", "skew must be 0")
    if api is Api.AV and not ultra_wide:
        if max(abs(ldc[0] - depth.cx), abs(ldc[1] - depth.cy)) > LDC_TOLERANCE_PX:
            raise InvariantViolation(
                "lens_distortion_center",
                f"{ldc} differs from principal point ({depth.cx}, {depth.cy})",
            )

    extras = {k: v for k, v in doc.items() if k not in KNOWN_KEYS}
    return CaptureMeta(
        device=device,
        api=api,
        os_version=os_version,
        lens_distortion_center=ldc,
        intrinsic_reference_dimensions=ird,
        depth_intrinsics_unscaled=depth,
        color_intrinsics=color,
        forward_lut=_lut(doc.get("distortion_lut"), "distortion_lut", ldc, ird),
        inverse_lut=_lut(doc.get("inverse_distortion_lut"), "inverse_distortion_lut", ldc, ird),
        ultra_wide=ultra_wide,
        extras=extras,
    )


def parse_meta(text: bytes | str) -> CaptureMeta:
    """Parse and validate one ``meta.json`` document."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BadType("<document>", f"not UTF-8: {exc}") from None
    if not text.strip():
        doc = {}
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadType("<document>", f"invalid JSON: {exc}") from None
    return meta_from_dict(doc)


def load_meta(path) -> CaptureMeta:
    return parse_meta(Path(path).read_bytes())


def meta_to_dict(m: CaptureMeta) -> dict:
    d = m.depth_intrinsics_unscaled
    c = m.color_intrinsics
    doc = {
        "device": m.device,
        "api": m.api.value,
        "os_version": m.os_version,
        "lens_distortion_center": list(m.lens_distortion_center),
        "intrinsic_reference_dimensions": list(m.intrinsic_reference_dimensions),
        "depth_intrinsics_unscaled": {"fx": d.f, "fy": d.fy, "cx": d.cx, "cy": d.cy},
        "color_intrinsics": {
            "fx": c.f, "fy": c.fy, "cx": c.cx, "cy": c.cy, "ref_w": c.ref_w, "ref_h": c.ref_h,
        },
    }
    if d.skew:
        doc["depth_intrinsics_unscaled"]["skew"] = d.skew
    if c.skew:
        doc["color_intrinsics"]["skew"] = c.skew
    if m.forward_lut is not None:
        doc["distortion_lut"] = m.forward_lut.magnifications.tolist()
    if m.inverse_lut is not None:
        doc["inverse_distortion_lut"] = m.inverse_lut.magnifications.tolist()
    if m.ultra_wide:
        doc["ultra_wide"] = True
    doc.update(m.extras)
    return doc


def serialize_meta(m: CaptureMeta) -> str:
    return json.dumps(meta_to_dict(m), indent=2, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------
# fixtures

def fixtures_dir() -> Path:
    override = os.environ.get(FIXTURES_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("depthaudit") / "data" / "fixtures"))


def load_fixture_records(directory=None) -> list[CaptureMeta]:
    directory = Path(directory) if directory is not None else fixtures_dir()
    return [load_meta(p) for p in sorted(directory.glob("*.json"))]


def fixture_database(directory=None) -> list[SessionPair]:
    """Bundled AV/ARKit record pairs, matched on (device, os_version)."""
    records = load_fixture_records(directory)
    order: list[tuple[str, str]] = []
    by_key: dict[tuple[str, str], dict[Api, CaptureMeta]] = {}
    for rec in records:
        key = (rec.device, rec.os_version)
        if key not in by_key:
            order.append(key)
            by_key[key] = {}
        if rec.api in by_key[key]:
            raise InvariantViolation("device", f"duplicate {rec.api.value} record for {key}")
        by_key[key][rec.api] = rec
    pairs = []
    for key in order:
        sessions = by_key[key]
        if set(sessions) != {Api.AV, Api.ARKIT}:
            raise InvariantViolation("api", f"fixture {key} lacks a matching session")
        pairs.append(SessionPair(av=sessions[Api.AV], ar=sessions[Api.ARKIT]))
    return pairs


def lookup(device: str, api: Api | str, os_version: str | None = None, pairs=None) -> CaptureMeta:
    """Find one fixture record; ``os_version`` matches as a prefix."""
    api = Api(api)
    pairs = fixture_database() if pairs is None else pairs
    hits = []
    for pair in pairs:
        rec = pair.av if api is Api.AV else pair.ar
        if rec.device == device and (os_version is None or rec.os_version.startswith(os_version)):
            hits.append(rec)
    if not hits:
        raise KeyError(f"no fixture for {device!r} {api.value} {os_version or ''}".strip())
    if len(hits) > 1:
        raise KeyError(f"{device!r} {api.value} is ambiguous; give an os_version")
    return hits[0]


def lookup_pair(device: str, os_version: str | None = None, pairs=None) -> SessionPair:
    pairs = fixture_database() if pairs is None else pairs
    av = lookup(device, Api.AV, os_version, pairs)
    return next(p for p in pairs if p.av is av)


def meta_ratios(pair: SessionPair) -> tuple[float, float, float]:
    """(ARKit/AV depth focal, ARKit/AV IRD width, ARKit/AV IRD height)."""
    av, ar = pair.av, pair.ar
    if av.depth_f == 0 or av.ird[0] == 0 or av.ird[1] == 0:
        raise InvariantViolation("depth_intrinsics_unscaled", "zero denominator")
    return ar.depth_f / av.depth_f, ar.ird[0] / av.ird[0], ar.ird[1] / av.ird[1]


def percent(ratio: float) -> float:
    return 100.0 * (ratio - 1.0)
