"""On-disk formats: DPF1 depth rasters, binary PPM, ASCII PLY, corners.csv, board.json.

DPF1 layout (little-endian): magic ``b"DPF1"``, width u32, height u32,
reserved u32 (0), then ``width * height`` float32 metres in row-major
order.  NaN marks invalid pixels.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .camera import DepthMap
from .pose import Correspondences

DPF_MAGIC = b"DPF1"
DPF_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    pass


# --------------------------------------------------------------------------
# depth rasters

def encode_depth(d: DepthMap) -> bytes:
    h, w = d.values.shape
    payload = d.values.astype("<f4").tobytes()
    return DPF_HEADER.pack(DPF_MAGIC, w, h, 0) + payload


def decode_depth(data: bytes) -> DepthMap:
    if len(data) < DPF_HEADER.size:
        raise FormatError("depth file shorter than its header")
    magic, w, h, _ = DPF_HEADER.unpack_from(data)
    if magic != DPF_MAGIC:
        raise FormatError(f"bad depth magic {magic!r}")
    expected = DPF_HEADER.size + 4 * w * h
    if len(data) != expected:
        raise FormatError(f"depth file has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f4", offset=DPF_HEADER.size).reshape(h, w)
    return DepthMap(values.astype(np.float64))


def write_depth(path, d: DepthMap) -> None:
    Path(path).write_bytes(encode_depth(d))


def read_depth(path) -> DepthMap:
    return decode_depth(Path(path).read_bytes())


# --------------------------------------------------------------------------
# images

def encode_ppm(rgb) -> bytes:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise FormatError("PPM needs an (H, W, 3) uint8 array")
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise FormatError("only 8-bit binary PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    body = data[pos : pos + w * h * 3]
    if len(body) != w * h * 3:
        raise FormatError("truncated PPM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path, rgb) -> None:
    Path(path).write_bytes(encode_ppm(rgb))


def read_ppm(path) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())


# --------------------------------------------------------------------------
# point clouds

def encode_ply(points) -> bytes:
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    # str() of a float32 scalar is its shortest round-trip form
    lines += [f"{str(x)} {str(y)} {str(z)}" for x, y, z in pts]
    return ("\n".join(lines) + "\n").encode("ascii")


def decode_ply(data: bytes) -> np.ndarray:
    text = data.decode("ascii")
    header, _, body = text.partition("end_header\n")
    count = None
    for line in header.splitlines():
        if line.startswith("element vertex"):
            count = int(line.split()[2])
    if count is None:
        raise FormatError("PLY header lacks a vertex element")
    rows = [line.split() for line in body.splitlines() if line.strip()]
    if len(rows) != count:
        raise FormatError(f"PLY declares {count} vertices but holds {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def write_ply(path, points) -> None:
    Path(path).write_bytes(encode_ply(points))


# --------------------------------------------------------------------------
# corners and boards

def encode_corners(ids, pixels) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "u", "v"])
    for i, (u, v) in zip(np.asarray(ids).tolist(), np.asarray(pixels, dtype=np.float64).tolist()):
        writer.writerow([i, repr(u), repr(v)])
    return buf.getvalue()


def decode_corners(text: str) -> tuple[np.ndarray, np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["id", "u", "v"]:
        raise FormatError("corners.csv must start with the header id,u,v")
    ids, pixels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"corners.csv line {lineno}: expected 3 columns")
        ids.append(int(row[0]))
        pixels.append((float(row[1]), float(row[2])))
    return np.array(ids, dtype=np.int64), np.array(pixels, dtype=np.float64).reshape(-1, 2)


def encode_board(ids, board_points, square_size: float | None = None) -> str:
    doc = {"schema_version": 1}
    if square_size is not None:
        doc["square_size"] = square_size
    doc["corners"] = {
        str(i): [x, y] for i, (x, y, _) in zip(np.asarray(ids).tolist(), np.asarray(board_points).tolist())
    }
    return json.dumps(doc, indent=2) + "\n"


def decode_board(text: str) -> dict[int, tuple[float, float]]:
    doc = json.loads(text)
    corners = doc.get("corners") if isinstance(doc, dict) else None
    if not isinstance(corners, dict):
        raise FormatError("board.json needs a 'corners' object mapping id -> [x, y]")
    return {int(k): (float(v[0]), float(v[1])) for k, v in corners.items()}


def join_corners(ids, pixels, board: dict) -> Correspondences:
    """Pair detected corners with board coordinates; unknown ids are dropped."""
    keep = [n for n, i in enumerate(ids) if int(i) in board]
    ids = np.asarray(ids)[keep]
    pts = [(board[int(i)][0], board[int(i)][1], 0.0) for i in ids]
    return Correspondences(ids, np.array(pts).reshape(-1, 3), np.asarray(pixels)[keep])
