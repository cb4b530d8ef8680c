"""Map containers and file formats.

Normal maps (``SNMP1``) and kappa maps (``SKMP1``) share one layout:

    bytes 0..4    magic, b"SNMP1" or b"SKMP1"
    bytes 5..8    width,  little-endian uint32
    bytes 9..12   height, little-endian uint32
    bytes 13..    row-major payload of little-endian float32 values,
                  3 per pixel for normals, 1 per pixel for kappa

Invalid pixels are stored as quiet NaN (a full NaN triplet for normals).
Reads and writes round-trip bit for bit; any structural problem raises
FormatError carrying the byte offset of the first offending value.

CSV and JSON emitters for reports, curves and sample lists live here too
so the CLI stays a thin argument-parsing shell.
"""

import csv
import json
import struct

import numpy as np

from .errors import DomainError, FormatError, ShapeError
from .sphere import UNIT_NORM_TOL, normalize

__all__ = [
    "NormalMap",
    "KappaMap",
    "read_normal_map",
    "write_normal_map",
    "read_kappa_map",
    "write_kappa_map",
    "write_metrics_json",
    "write_curve_csv",
    "write_vectors_csv",
    "read_vectors_csv",
    "write_selection_csv",
]

MAGIC_NORMAL = b"SNMP1"
MAGIC_KAPPA = b"SKMP1"
_HEADER = struct.Struct("<5sII")


class NormalMap:
    """An (H, W, 3) float32 grid of unit normals; invalid pixels are NaN triplets."""

    def __init__(self, data):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ShapeError(f"expected an (H, W, 3) array, got {data.shape}")
        nan = np.isnan(data)
        mixed = np.logical_xor(nan.any(axis=2), nan.all(axis=2))
        if np.any(mixed):
            raise DomainError("pixels must be fully NaN or fully finite")
        present = ~nan.all(axis=2)
        norms = np.linalg.norm(data[present].astype(np.float64), axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) >= UNIT_NORM_TOL:
            raise DomainError("present pixels must be unit length within 1e-6")
        self.data = data

    @classmethod
    def from_vectors(cls, vectors, valid=None):
        """Build a map from float vectors, normalizing and masking in one go."""
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 3:
            raise ShapeError(f"expected an (H, W, 3) array, got {v.shape}")
        out = np.full(v.shape, np.nan)
        if valid is None:
            valid = np.ones(v.shape[:2], dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != v.shape[:2]:
                raise ShapeError(f"valid mask {valid.shape} does not match {v.shape[:2]}")
        if np.any(valid):
            out[valid] = normalize(v[valid])
        return cls(out.astype(np.float32))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def valid(self):
        return ~np.isnan(self.data[..., 0])

    def __eq__(self, other):
        if not isinstance(other, NormalMap):
            return NotImplemented
        return self.data.shape == other.data.shape and self.data.tobytes() == other.data.tobytes()


class KappaMap:
    """An (H, W) float32 grid of concentrations; invalid pixels are NaN."""

    def __init__(self, data):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 2:
            raise ShapeError(f"expected an (H, W) array, got {data.shape}")
        finite = ~np.isnan(data)
        if np.any(data[finite] < 0.0) or not np.all(np.isfinite(data[finite])):
            raise DomainError("kappa values must be finite and >= 0 (or NaN)")
        self.data = data

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def valid(self):
        return ~np.isnan(self.data)

    def __eq__(self, other):
        if not isinstance(other, KappaMap):
            return NotImplemented
        return self.data.shape == other.data.shape and self.data.tobytes() == other.data.tobytes()


def _read_header(buf, magic, path):
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(buf))
    got, width, height = _HEADER.unpack_from(buf)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}", offset=0)
    return width, height


def write_normal_map(normal_map, path):
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC_NORMAL, normal_map.width, normal_map.height))
        f.write(normal_map.data.astype("<f4", copy=False).tobytes())


def read_normal_map(path):
    with open(path, "rb") as f:
        buf = f.read()
    width, height = _read_header(buf, MAGIC_NORMAL, path)
    expected = _HEADER.size + 12 * width * height
    if len(buf) != expected:
        raise FormatError(
            f"{path}: payload is {len(buf) - _HEADER.size} bytes, expected {expected - _HEADER.size}",
            offset=min(len(buf), expected),
        )
    data = np.frombuffer(buf, dtype="<f4", count=width * height * 3, offset=_HEADER.size)
    data = data.reshape(height, width, 3).copy()

    nan = np.isnan(data)
    mixed = np.logical_xor(nan.any(axis=2), nan.all(axis=2))
    bad = np.flatnonzero(mixed.ravel())
    if bad.size:
        raise FormatError(f"{path}: pixel {bad[0]} mixes NaN and finite components",
                          offset=_HEADER.size + 12 * int(bad[0]))
    present = ~nan.all(axis=2)
    norms = np.linalg.norm(data.astype(np.float64), axis=-1)
    with np.errstate(invalid="ignore"):
        off_unit = present & ~(np.abs(norms - 1.0) < UNIT_NORM_TOL)
    bad = np.flatnonzero(off_unit.ravel())
    if bad.size:
        raise FormatError(f"{path}: pixel {bad[0]} is not unit length",
                          offset=_HEADER.size + 12 * int(bad[0]))
    return NormalMap(data)


def write_kappa_map(kappa_map, path):
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC_KAPPA, kappa_map.width, kappa_map.height))
        f.write(kappa_map.data.astype("<f4", copy=False).tobytes())


def read_kappa_map(path):
    with open(path, "rb") as f:
        buf = f.read()
    width, height = _read_header(buf, MAGIC_KAPPA, path)
    expected = _HEADER.size + 4 * width * height
    if len(buf) != expected:
        raise FormatError(
            f"{path}: payload is {len(buf) - _HEADER.size} bytes, expected {expected - _HEADER.size}",
            offset=min(len(buf), expected),
        )
    data = np.frombuffer(buf, dtype="<f4", count=width * height, offset=_HEADER.size)
    data = data.reshape(height, width).copy()
    present = ~np.isnan(data)
    with np.errstate(invalid="ignore"):
        bad_mask = present & ((data < 0.0) | ~np.isfinite(data))
    bad = np.flatnonzero(bad_mask.ravel())
    if bad.size:
        raise FormatError(f"{path}: pixel {bad[0]} has kappa {data.ravel()[bad[0]]}",
                          offset=_HEADER.size + 4 * int(bad[0]))
    return KappaMap(data)


def _fmt(x):
    return repr(float(x))


def write_metrics_json(report, path):
    with open(path, "w") as f:
        json.dump(report.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_curve_csv(curve, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x_percent", "value"])
        for x, v in zip(curve.x_percent, curve.values):
            w.writerow([int(x), _fmt(v)])


def write_vectors_csv(vectors, path):
    v = np.asarray(vectors, dtype=np.float64)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "z"])
        for row in v:
            w.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(row[2])])


def read_vectors_csv(path):
    """Read an x,y,z CSV back into an (N, 3) float array."""
    rows = []
    offset = 0
    with open(path, "rb") as f:
        raw = f.read()
    lines = raw.decode("utf-8", errors="replace").splitlines(keepends=True)
    for i, line in enumerate(lines):
        stripped = line.strip()
        if i == 0 and stripped.lower().replace(" ", "") == "x,y,z":
            offset += len(line.encode("utf-8"))
            continue
        if stripped:
            parts = stripped.split(",")
            if len(parts) != 3:
                raise FormatError(f"{path}: expected 3 columns, got {len(parts)}", offset=offset)
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise FormatError(f"{path}: non-numeric field in {stripped!r}", offset=offset)
        offset += len(line.encode("utf-8"))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 3)


def write_selection_csv(selection, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "role"])
        for idx in selection.importance:
            w.writerow([int(idx), "importance"])
        for idx in selection.coverage:
            w.writerow([int(idx), "coverage"])
