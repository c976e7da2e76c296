"""Report and field serialization: CSV/JSON with a config header, and the QRM1 binary dump."""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .fields import ScalarField
from .grid import Axis, Grid

MAGIC = b"QRM1"


def fmt(v) -> str:
    """17 significant digits: round-trip exact for float64."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return fmt(v)
        return float(fmt(v))
    return obj


def config_header(config: Mapping) -> list[str]:
    """Resolved config as '# '-prefixed JSON lines."""
    text = json.dumps(_jsonable(config), sort_keys=True, indent=1)
    return ["# " + line for line in text.splitlines()]


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config: Mapping | None = None) -> Path:
    path = Path(path)
    lines = config_header(config) if config is not None else []
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float)
    return cols, data.reshape(len(lines) - 1, len(cols))


def write_json(path, payload: Mapping, config: Mapping | None = None) -> Path:
    path = Path(path)
    doc = {"config": _jsonable(config or {}), **_jsonable(payload)}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def write_field_csv(path, u: ScalarField, config: Mapping | None = None) -> Path:
    grid = u.grid
    cols = list(grid.names) + ["value"]
    mesh = [m.ravel() for m in grid.mesh]
    rows = zip(*mesh, u.flat)
    return write_csv(path, cols, rows, config)


def write_qrm1(path, u: ScalarField) -> Path:
    """Magic, axis count, then per axis (n, min, max), then values, all little-endian."""
    grid = u.grid
    buf = bytearray(MAGIC)
    buf += struct.pack("<I", grid.ndim)
    for a in grid.axes:
        buf += struct.pack("<Qdd", a.n, a.lo, a.hi)
    buf += np.ascontiguousarray(u.flat, dtype="<f8").tobytes()
    path = Path(path)
    path.write_bytes(bytes(buf))
    return path


def read_qrm1(path, names: Sequence[str] | None = None) -> ScalarField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a QRM1 file")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    off = 8
    axes = []
    for d in range(ndim):
        n, lo, hi = struct.unpack_from("<Qdd", raw, off)
        off += 24
        name = names[d] if names else f"x{d + 1}"
        axes.append(Axis(name, lo, hi, int(n)))
    grid = Grid(tuple(axes))
    vals = np.frombuffer(raw, dtype="<f8", offset=off)
    if vals.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {vals.size}")
    return ScalarField(grid, vals.reshape(grid.shape).copy())
