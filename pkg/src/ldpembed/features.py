"""Feature matrices: normalization and file IO.

A feature matrix is a dense float64 ndarray with one row per user. Only the
features are treated as private; everything in this module runs on the user
side (normalization against publicly known field bounds) or is plain IO.

File formats
------------
CSV      comma-separated decimal floats, one row per user.
Binary   magic b"PGE1", uint64-LE n, uint64-LE d, then n*d float64-LE values
         row-major.
Labels   one integer class per line, n lines.
Bounds   two comma-separated rows: per-dimension minima, then maxima.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, ParseError

MAGIC = b"PGE1"


@dataclass(frozen=True)
class FeatureBounds:
    """Per-dimension value ranges, known to the users up front."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("bounds must be two equal-length 1-d arrays")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise InputError("bounds must be finite")
        if (lo > hi).any():
            raise InputError("lower bound exceeds upper bound")

    @classmethod
    def from_data(cls, X) -> "FeatureBounds":
        X = np.asarray(X, dtype=np.float64)
        return cls(lo=X.min(axis=0), hi=X.max(axis=0))


def normalize(X, bounds: FeatureBounds) -> np.ndarray:
    """Affinely map each column from [lo_j, hi_j] onto [-1, 1].

    Values are clamped afterwards, so inputs slightly outside the declared
    bounds (or float rounding) cannot escape the range. A constant column
    (lo_j == hi_j) maps to all zeros.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.isfinite(X).all():
        raise InputError("feature matrix contains non-finite values")
    if X.ndim != 2 or X.shape[1] != bounds.lo.size:
        raise InputError(f"feature matrix shape {X.shape} does not match bounds "
                         f"of dimension {bounds.lo.size}")
    span = bounds.hi - bounds.lo
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * (X - bounds.lo) / span - 1.0
    out[:, span == 0] = 0.0
    return np.clip(out, -1.0, 1.0)


def load_features(path) -> np.ndarray:
    """Load a feature matrix from CSV or PGE1 binary (sniffed by magic)."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return _load_binary(path)
    return _load_csv(path)


def _load_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(f"row has {len(parts)} values, expected {width}",
                                 line=lineno)
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise ParseError(f"non-numeric value in {line!r}", line=lineno)
    if not rows:
        raise ParseError(f"{path}: empty feature file")
    return np.asarray(rows, dtype=np.float64)


def _load_binary(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 20:
        raise FormatError(f"{path}: truncated header")
    n, d = struct.unpack("<QQ", data[4:20])
    expected = 20 + 8 * n * d
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n}x{d} matrix, "
                          f"got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=20)
    return values.reshape(n, d).astype(np.float64)


def save_features(X, path) -> None:
    """Write a matrix in the PGE1 binary format."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("expected a 2-d matrix")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", X.shape[0], X.shape[1]))
        fh.write(X.astype("<f8").tobytes(order="C"))


def load_labels(path) -> np.ndarray:
    """One integer class id per line."""
    path = Path(path)
    labels = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ParseError(f"non-integer label {line!r}", line=lineno)
    if not labels:
        raise ParseError(f"{path}: empty labels file")
    return np.asarray(labels, dtype=np.int64)


def load_bounds(path) -> FeatureBounds:
    path = Path(path)
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(p) for p in line.split(",")])
            except ValueError:
                raise ParseError(f"non-numeric bound in {line!r}", line=lineno)
    if len(rows) != 2:
        raise ParseError(f"{path}: bounds file must hold exactly two rows (lo, hi)")
    return FeatureBounds(lo=np.asarray(rows[0]), hi=np.asarray(rows[1]))


def save_bounds(bounds: FeatureBounds, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(repr(float(v)) for v in bounds.lo) + "\n")
        fh.write(",".join(repr(float(v)) for v in bounds.hi) + "\n")
