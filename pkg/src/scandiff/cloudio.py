"""Cloud file formats, hashing, and deterministic JSON.

Two cloud formats, both plain text:

* ASCII PLY with float or double x/y/z properties on the vertex element.
  The capture pose rides in a header comment, ``comment sensor_pose tx ty
  tz roll pitch yaw``, written at full precision so a write/read cycle
  reproduces the cloud bit for bit. An optional ``comment label ...`` names
  the cloud.
* xyz CSV: one ``x,y,z`` triple per line, optional header line.

Parse errors name the offending line. Exports meant to be byte-stable
(field JSON) go through canonical_json_dumps, which fixes key order by
construction order and formats every float at 9 significant digits.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import PointCloud, RigidTransform


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _fmt(value: float) -> str:
    # shortest decimal that round-trips a float64
    return format(float(value), ".17g")


def save_cloud_ply(cloud: PointCloud, path) -> PointCloud:
    """Write an ASCII PLY and return the cloud with its source recorded."""
    path = Path(path)
    pose = cloud.sensor_pose
    lines = [
        "ply",
        "format ascii 1.0",
        "comment sensor_pose "
        + " ".join(_fmt(v) for v in (*pose.translation, pose.roll, pose.pitch, pose.yaw)),
    ]
    if cloud.label:
        lines.append(f"comment label {cloud.label}")
    lines += [
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    for p in cloud.points:
        lines.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return PointCloud(
        points=cloud.points,
        sensor_pose=cloud.sensor_pose,
        label=cloud.label,
        source_path=str(path),
        source_sha256=sha256_file(path),
    )


def load_cloud_ply(path, sensor_pose: Optional[RigidTransform] = None) -> PointCloud:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path}: line 1: not a PLY file (missing 'ply' magic)")

    vertex_count = None
    prop_names = []
    in_vertex_element = False
    pose_from_file = None
    label = ""
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if line == "end_header":
            body_start = lineno
            break
        if line.startswith("format"):
            if "ascii" not in line:
                raise ValueError(f"{path}: line {lineno}: only ASCII PLY is supported")
        elif line.startswith("comment sensor_pose"):
            parts = line.split()
            if len(parts) != 8:
                raise ValueError(f"{path}: line {lineno}: sensor_pose comment needs 6 numbers")
            vals = [float(v) for v in parts[2:]]
            pose_from_file = RigidTransform(
                translation=np.array(vals[:3]), roll=vals[3], pitch=vals[4], yaw=vals[5]
            )
        elif line.startswith("comment label"):
            label = line[len("comment label") :].strip()
        elif line.startswith("element"):
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: malformed element declaration")
            in_vertex_element = parts[1] == "vertex"
            if in_vertex_element:
                try:
                    vertex_count = int(parts[2])
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: bad vertex count") from None
        elif line.startswith("property") and in_vertex_element:
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("float", "float32", "double", "float64"):
                raise ValueError(f"{path}: line {lineno}: unsupported vertex property {line!r}")
            prop_names.append(parts[2])
    if body_start is None:
        raise ValueError(f"{path}: header never ends (no end_header)")
    if vertex_count is None:
        raise ValueError(f"{path}: header declares no vertex element")
    for axis in ("x", "y", "z"):
        if axis not in prop_names:
            raise ValueError(f"{path}: vertex element lacks property {axis}")
    ix, iy, iz = (prop_names.index(a) for a in ("x", "y", "z"))

    body = lines[body_start : body_start + vertex_count]
    if len(body) < vertex_count:
        raise ValueError(
            f"{path}: expected {vertex_count} vertex rows, file ends after {len(body)}"
        )
    points = np.zeros((vertex_count, 3))
    for i, raw in enumerate(body):
        lineno = body_start + 1 + i
        parts = raw.split()
        if len(parts) < len(prop_names):
            raise ValueError(f"{path}: line {lineno}: expected {len(prop_names)} values")
        try:
            points[i] = (float(parts[ix]), float(parts[iy]), float(parts[iz]))
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric coordinate") from None
        if not np.all(np.isfinite(points[i])):
            raise ValueError(f"{path}: line {lineno}: non-finite coordinate")

    pose = sensor_pose if sensor_pose is not None else pose_from_file
    return PointCloud(
        points=points,
        sensor_pose=pose if pose is not None else RigidTransform.identity(),
        label=label,
        source_path=str(path),
        source_sha256=sha256_file(path),
    )


def save_cloud_csv(cloud: PointCloud, path) -> PointCloud:
    path = Path(path)
    rows = [f"{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])}" for p in cloud.points]
    path.write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")
    return PointCloud(
        points=cloud.points,
        sensor_pose=cloud.sensor_pose,
        label=cloud.label,
        source_path=str(path),
        source_sha256=sha256_file(path),
    )


def load_cloud_csv(path, sensor_pose: Optional[RigidTransform] = None) -> PointCloud:
    path = Path(path)
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if lineno == 1 and any(not _is_number(p) for p in parts):
            continue  # header line
        if len(parts) != 3:
            raise ValueError(f"{path}: line {lineno}: expected 3 values, got {len(parts)}")
        try:
            triple = tuple(float(p) for p in parts)
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric coordinate") from None
        if not all(math.isfinite(v) for v in triple):
            raise ValueError(f"{path}: line {lineno}: non-finite coordinate")
        rows.append(triple)
    points = np.array(rows) if rows else np.zeros((0, 3))
    return PointCloud(
        points=points,
        sensor_pose=sensor_pose if sensor_pose is not None else RigidTransform.identity(),
        source_path=str(path),
        source_sha256=sha256_file(path),
    )


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return "ply_ascii"
    if suffix in (".csv", ".xyz", ".txt"):
        return "xyz_csv"
    raise ValueError(f"cannot infer cloud format from {path}; use .ply or .csv")


def load_cloud(path, format: Optional[str] = None, sensor_pose=None) -> PointCloud:
    fmt = format if format is not None else detect_format(path)
    if fmt == "ply_ascii":
        return load_cloud_ply(path, sensor_pose=sensor_pose)
    if fmt == "xyz_csv":
        return load_cloud_csv(path, sensor_pose=sensor_pose)
    raise ValueError(f"unknown cloud format {fmt!r}")


def save_cloud(cloud: PointCloud, path, format: Optional[str] = None) -> PointCloud:
    fmt = format if format is not None else detect_format(path)
    if fmt == "ply_ascii":
        return save_cloud_ply(cloud, path)
    if fmt == "xyz_csv":
        return save_cloud_csv(cloud, path)
    raise ValueError(f"unknown cloud format {fmt!r}")


def canonical_json_dumps(obj) -> str:
    """Deterministic JSON: construction key order, floats at %.9g."""
    pieces = []
    _canon(obj, pieces)
    return "".join(pieces)


def _canon(obj, out: list) -> None:
    if isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise ValueError("cannot serialize non-finite float")
        out.append(format(value, ".9g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _canon(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(",")
            _canon(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} canonically")
