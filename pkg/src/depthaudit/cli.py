"""``depthaudit`` command line.

Exit codes: 0 success / healthy, 2 issues found (audit) or a verdict that
does not call for the requested fix, 1 any error including bad usage.
"""

from __future__ import annotations

import functools
import json
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .audit import DEFAULT_DEPTH_THRESHOLD, DEFAULT_IRD_THRESHOLD, IssueClass, audit_report, classify
from .bench import generate_dataset, load_scene
from .bundle import BOARD, CORNERS, DEPTH, META, load_bundle, load_corners
from .calibration import CalibrationView, calibrate_dataset, focal_discrepancy
from .camera import DEPTH_HEIGHT, DEPTH_WIDTH, Intrinsics, rescale_intrinsics, unproject_all
from .correction import corrected_focals, zoom_depth_map, zoom_factors
from .errors import DepthAuditError
from .formats import write_depth, write_ply
from .metadata import (
    Api,
    CaptureMeta,
    SessionPair,
    fixture_database,
    load_meta,
    meta_from_dict,
    serialize_meta,
)
from .verification import emit_histogram, verify_depth

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ISSUES = 2


class _Group(click.Group):
    """Maps usage errors to exit code 1 so that 2 keeps meaning "issues found"."""

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as exc:
            exc.exit_code = EXIT_ERROR
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = EXIT_ERROR
            raise


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_ERROR)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DepthAuditError, ValueError, KeyError, OSError) as exc:
            _fail(str(exc) or type(exc).__name__)

    return wrapper


def _load_config(ctx, _param, value):
    if value is None:
        return None
    try:
        doc = json.loads(Path(value).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}") from None
    if not isinstance(doc, dict):
        raise click.BadParameter("config must be a JSON object keyed by subcommand")
    ctx.default_map = {k.replace("_", "-"): v for k, v in doc.items()}
    return value


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="depthaudit")
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="JSON file of per-subcommand defaults; flags override it.",
)
def cli():
    """Audit and repair TrueDepth capture metadata."""


# --------------------------------------------------------------------------
# shared helpers

def _pair_from(av_path, ar_path) -> SessionPair:
    return SessionPair(av=load_meta(av_path), ar=load_meta(ar_path))


def _vga(meta: CaptureMeta) -> Intrinsics:
    return rescale_intrinsics(meta.depth_intrinsics_unscaled, DEPTH_WIDTH, DEPTH_HEIGHT)


def _intrinsics_from_file(path: Path) -> tuple[Intrinsics, str]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    if "depth_intrinsics_unscaled" in doc:
        return _vga(meta_from_dict(doc)), path.stem
    label = path.stem
    if "intrinsics" in doc:
        doc = doc["intrinsics"]
        label = "charuco"
    k = Intrinsics(
        f=float(doc["f"]),
        cx=float(doc["cx"]),
        cy=float(doc["cy"]),
        ref_w=int(doc.get("ref_w", DEPTH_WIDTH)),
        ref_h=int(doc.get("ref_h", DEPTH_HEIGHT)),
        aspect=float(doc.get("aspect", 1.0)),
        skew=float(doc.get("skew", 0.0)),
    )
    return rescale_intrinsics(k, DEPTH_WIDTH, DEPTH_HEIGHT), label


def resolve_intrinsics(choice: str, meta: CaptureMeta, av_meta=None, ar_meta=None) -> tuple[Intrinsics, str]:
    """``factory``, ``corrected`` (needs both session metas) or a JSON file."""
    if choice == "factory":
        return _vga(meta), "factory"
    if choice == "corrected":
        if not (av_meta and ar_meta):
            raise click.UsageError("--intrinsics corrected needs --av-meta and --ar-meta")
        focals = corrected_focals(_pair_from(av_meta, ar_meta))
        f_vga = focals["av" if meta.api is Api.AV else "ar"][1]
        return _vga(meta).with_focal(f_vga), "corrected"
    path = Path(choice)
    if not path.is_file():
        raise click.BadParameter(f"expected factory, corrected or a JSON file, got {choice!r}")
    return _intrinsics_from_file(path)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------
# audit

@cli.command()
@click.option("--av", "av_path", type=click.Path(exists=True, dir_okay=False), help="AV session meta.json.")
@click.option("--ar", "ar_path", type=click.Path(exists=True, dir_okay=False), help="ARKit session meta.json.")
@click.option("--fixtures", is_flag=True, help="Audit every bundled fixture pair.")
@click.option("--report", type=click.Path(dir_okay=False), help="Write report.json here.")
@click.option("--depth-threshold", type=float, default=DEFAULT_DEPTH_THRESHOLD, show_default=True)
@click.option("--ird-threshold", type=float, default=DEFAULT_IRD_THRESHOLD, show_default=True)
@handle_errors
def audit(av_path, ar_path, fixtures, report, depth_threshold, ird_threshold):
    """Classify session pairs as Healthy, ZoomMisalignment or WrongFocal."""
    if fixtures == bool(av_path or ar_path):
        raise click.UsageError("give either --av and --ar, or --fixtures")
    if fixtures:
        pairs = fixture_database()
    else:
        if not (av_path and ar_path):
            raise click.UsageError("--av and --ar must be given together")
        pairs = [_pair_from(av_path, ar_path)]
    result = audit_report(classify(p, depth_threshold, ird_threshold) for p in pairs)
    click.echo(result.to_text(), nl=False)
    if report:
        _write_text(Path(report), result.to_json())
    sys.exit(EXIT_ISSUES if result.has_issues else EXIT_OK)


# --------------------------------------------------------------------------
# fixes

def _with_correction(meta: CaptureMeta, entry: dict, **changes) -> CaptureMeta:
    extras = dict(meta.extras)
    extras["corrections"] = list(extras.get("corrections", [])) + [entry]
    return replace(meta, extras=extras, **changes)


@cli.command("fix-depth")
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.option("--av-meta", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ar-meta", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True, help="Apply the zoom even if the audit does not call for it.")
@handle_errors
def fix_depth(bundle, av_meta, ar_meta, out, force):
    """Zoom an ARKit depth raster back onto the RGB frame."""
    src, dst = Path(bundle), Path(out)
    if src.resolve() == dst.resolve():
        raise click.UsageError("--out must differ from the input bundle")
    pair = _pair_from(av_meta, ar_meta)
    verdict = classify(pair)
    if verdict.issue is not IssueClass.ZOOM_MISALIGNMENT and not force:
        click.echo(
            f"verdict is {verdict.issue.value}, not ZoomMisalignment; use --force to zoom anyway",
            err=True,
        )
        sys.exit(EXIT_ISSUES)
    z = zoom_factors(pair)
    data = load_bundle(src)
    if data.depth is None:
        raise ValueError(f"{src / DEPTH} is missing")
    k = _vga(data.meta)
    fixed = zoom_depth_map(data.depth, k, z)
    dst.mkdir(parents=True, exist_ok=True)
    for item in sorted(src.iterdir()):
        if item.is_file() and item.name not in (META, DEPTH):
            shutil.copyfile(item, dst / item.name)
    write_depth(dst / DEPTH, fixed)
    entry = {
        "op": "zoom_depth",
        "zoom": [z.zx, z.zy],
        "principal_point_vga": [k.cx, k.cy],
        "av_ird": list(pair.av.ird),
        "ar_ird": list(pair.ar.ird),
        "forced": bool(force and verdict.issue is not IssueClass.ZOOM_MISALIGNMENT),
    }
    _write_text(dst / META, serialize_meta(_with_correction(data.meta, entry)))
    click.echo(f"zoom ({z.zx:.6f}, {z.zy:.6f}) applied; wrote {dst}")


@cli.command("fix-intrinsics")
@click.option("--av-meta", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ar-meta", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--session", type=click.Choice(["av", "ar"]), required=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Corrected meta.json (default: stdout).")
@click.option("--force", is_flag=True, help="Correct even when the focals already agree.")
@handle_errors
def fix_intrinsics(av_meta, ar_meta, session, out, force):
    """Replace a session's depth focal by the corrected value."""
    pair = _pair_from(av_meta, ar_meta)
    meta = pair.av if session == "av" else pair.ar
    verdict = classify(pair)
    depth = meta.depth_intrinsics_unscaled
    if verdict.issue is IssueClass.WRONG_FOCAL or force:
        f_unscaled, f_vga = corrected_focals(pair)[session]
        entry = {
            "op": "focal",
            "session": session,
            "f_unscaled_before": depth.f,
            "f_unscaled": f_unscaled,
            "f_vga": f_vga,
        }
        fixed = _with_correction(meta, entry, depth_intrinsics_unscaled=depth.with_focal(f_unscaled))
        note = f"corrected focal: {f_unscaled:.2f} px unscaled, {f_vga:.2f} px at {DEPTH_WIDTH}x{DEPTH_HEIGHT}"
    else:
        fixed = meta
        f_vga = _vga(meta).f
        note = f"no correction needed: focal stays {depth.f:.2f} px unscaled, {f_vga:.2f} px at {DEPTH_WIDTH}x{DEPTH_HEIGHT}"
    if out:
        _write_text(Path(out), serialize_meta(fixed))
        click.echo(note)
    else:
        click.echo(note, err=True)
        click.echo(serialize_meta(fixed), nl=False)


# --------------------------------------------------------------------------
# depth consumers

_intrinsics_help = "factory, corrected (needs --av-meta/--ar-meta) or a JSON intrinsics file."


@cli.command()
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.option("--intrinsics", "choice", default="factory", show_default=True, help=_intrinsics_help)
@click.option("--av-meta", type=click.Path(exists=True, dir_okay=False))
@click.option("--ar-meta", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="PLY path (default: BUNDLE/cloud.ply).")
@handle_errors
def unproject(bundle, choice, av_meta, ar_meta, out):
    """Write the depth raster as an ASCII PLY point cloud."""
    data = load_bundle(bundle)
    if data.depth is None:
        raise ValueError(f"{Path(bundle) / DEPTH} is missing")
    k, _ = resolve_intrinsics(choice, data.meta, av_meta, ar_meta)
    cloud = unproject_all(data.depth, k)
    path = Path(out) if out else Path(bundle) / "cloud.ply"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_ply(path, cloud)
    click.echo(f"{len(cloud)} points -> {path}")


@cli.command("verify-depth")
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.option("--intrinsics", "choices", multiple=True, help=_intrinsics_help + " Repeatable.")
@click.option("--av-meta", type=click.Path(exists=True, dir_okay=False))
@click.option("--ar-meta", type=click.Path(exists=True, dir_okay=False))
@click.option("--board", type=click.Path(exists=True, dir_okay=False), help="board.json overriding the bundle's.")
@click.option("--bin-width", type=float, default=0.25, show_default=True, help="Histogram bin width in mm.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory (default: BUNDLE).")
@handle_errors
def verify_depth_cmd(bundle, choices, av_meta, ar_meta, board, bin_width, out):
    """Compare sampled depth with PnP board depth at each corner."""
    data = load_bundle(bundle, board)
    if data.depth is None:
        raise ValueError(f"{Path(bundle) / DEPTH} is missing")
    if data.corners is None:
        raise ValueError(f"{bundle} needs {CORNERS} and {BOARD}")
    reports = []
    for choice in choices or ("factory",):
        k, label = resolve_intrinsics(choice, data.meta, av_meta, ar_meta)
        reports.append(verify_depth(data.depth, data.corners, k, label, bin_width))
    doc = emit_histogram(reports, bin_width)
    dst = Path(out) if out else Path(bundle)
    body = {"schema_version": 1, "reports": [r.to_dict() for r in reports]}
    _write_text(dst / "report.json", json.dumps(body, indent=2) + "\n")
    _write_text(dst / "hist.svg", doc.svg)
    _write_text(dst / "hist.csv", doc.csv)
    for r in reports:
        click.echo(r.summary())


# --------------------------------------------------------------------------
# calibration

def _dataset_views(root: Path, board_path):
    board = Path(board_path) if board_path else root / BOARD
    views = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (sub / CORNERS).exists():
            continue
        b = board if board.exists() else sub / BOARD
        views.append(CalibrationView(load_corners(sub / CORNERS, b), name=sub.name))
    return views


def _factory_meta(root: Path) -> CaptureMeta | None:
    if (root / META).exists():
        return load_meta(root / META)
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if (sub / META).exists():
            return load_meta(sub / META)
    return None


@cli.command()
@click.argument("dataset", required=False, type=click.Path(exists=True, file_okay=False))
@click.option("--voxel-mm", type=float, default=30.0, show_default=True)
@click.option("--init", "init", default="factory", show_default=True,
              help="Initial intrinsics: factory, a focal in px, or a JSON intrinsics file.")
@click.option("--board", type=click.Path(exists=True, dir_okay=False))
@click.option("--compare", nargs=2, type=float, metavar="F_FACTORY F_CALIB",
              help="Only print the focal discrepancy between two focal lengths.")
@click.option("--out", type=click.Path(dir_okay=False), help="calibration.json (default: DATASET/calibration.json).")
@handle_errors
def calibrate(dataset, voxel_mm, init, board, compare, out):
    """Focal-only calibration from a directory of corner bundles."""
    if compare:
        f_factory, f_calib = compare
        click.echo(f"focal discrepancy: {focal_discrepancy(f_factory, f_calib):.2f}%")
        if dataset is None:
            return
    if dataset is None:
        raise click.UsageError("DATASET is required unless --compare is given")
    root = Path(dataset)
    views = _dataset_views(root, board)
    meta = _factory_meta(root)
    factory = _vga(meta) if meta is not None else None
    if init == "factory":
        if factory is None:
            raise ValueError(f"no {META} found for factory intrinsics")
        k_init = factory
    elif Path(init).is_file():
        k_init, _ = _intrinsics_from_file(Path(init))
    else:
        try:
            f0 = float(init)
        except ValueError:
            raise click.BadParameter(f"--init expects factory, a number or a file, got {init!r}") from None
        base = factory or Intrinsics(f=f0, cx=(DEPTH_WIDTH - 1) / 2, cy=(DEPTH_HEIGHT - 1) / 2)
        k_init = base.with_focal(f0)
    result = calibrate_dataset(views, k_init, voxel_mm / 1000.0)
    doc = {"schema_version": 1, "views_total": len(views), **result.to_dict()}
    if factory is not None:
        doc["f_factory"] = factory.f
        doc["focal_discrepancy_percent"] = focal_discrepancy(factory.f, result.f)
    path = Path(out) if out else root / "calibration.json"
    _write_text(path, json.dumps(doc, indent=2) + "\n")
    line = (
        f"f = {result.f:.4f} px, rms = {result.rms_reproj:.4f} px, "
        f"views used {result.views_used}/{len(views)}"
    )
    if factory is not None:
        line += f", discrepancy vs factory {doc['focal_discrepancy_percent']:.2f}%"
    click.echo(line)
    if result.ill_conditioned:
        click.echo("warning: normal equations are ill-conditioned", err=True)


# --------------------------------------------------------------------------
# simulation

@cli.command()
@click.argument("scene", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@handle_errors
def simulate(scene, out, threads):
    """Render a synthetic scene into capture bundles."""
    spec = load_scene(scene)
    generate_dataset(spec, out, threads)
    click.echo(f"{len(spec.poses)} views -> {out}")


def main(argv=None):
    cli.main(args=argv, prog_name="depthaudit")


if __name__ == "__main__":  # pragma: no cover
    main()
