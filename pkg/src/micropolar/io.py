"""Snapshot files and CSV/JSON reports.

Snapshot layout (all little-endian)::

    b"MPS1"                      magic
    uint32  version              (1)
    uint32  n
    float64 L
    uint32  field count
    per field:
        uint32  name length, then UTF-8 name bytes
        uint32  components (1 for scalars, 3 for vectors)
    payload: per field in header order, complex128 values (real, imag
    float64 pairs) in row-major (k1, k2, k3) order with numpy FFT index
    order, i.e. index j maps to frequency j for j <= n/2 and j - n otherwise.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .spectral import Grid, hermitian_defect

MAGIC = b"MPS1"
VERSION = 1
HERMITIAN_TOL = 1e-12
_DTYPE = np.dtype("<c16")


class SnapshotError(ValueError):
    """Corrupt, truncated or non-Hermitian snapshot."""


@dataclass
class Snapshot:
    n: int
    L: float
    fields: dict[str, np.ndarray]
    version: int = VERSION

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.L)


def _as_components(name: str, arr: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(arr)
    if a.shape == (n, n, n):
        a = a[None]
    if a.ndim != 4 or a.shape[1:] != (n, n, n):
        raise SnapshotError(f"field {name!r} has shape {a.shape}, expected (c, {n}, {n}, {n})")
    return a


def write_snapshot(path: str | Path, grid: Grid, fields: Mapping[str, np.ndarray]) -> None:
    """Write coefficient arrays (shape ``(n,n,n)`` or ``(c,n,n,n)``) to ``path``."""
    n = grid.n
    header = bytearray(MAGIC)
    header += struct.pack("<IIdI", VERSION, n, float(grid.L), len(fields))
    arrays = []
    for name, arr in fields.items():
        a = _as_components(name, arr, n)
        raw = name.encode("utf-8")
        header += struct.pack("<I", len(raw)) + raw + struct.pack("<I", a.shape[0])
        arrays.append(np.ascontiguousarray(a, dtype=_DTYPE))
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        for a in arrays:
            fh.write(a.tobytes(order="C"))


def _take(buf: bytes, pos: int, size: int, what: str) -> tuple[bytes, int]:
    if pos + size > len(buf):
        raise SnapshotError(f"corrupt header: truncated while reading {what}")
    return buf[pos : pos + size], pos + size


def read_snapshot(path: str | Path, check_hermitian: bool = True) -> Snapshot:
    data = Path(path).read_bytes()
    magic, pos = _take(data, 0, 4, "magic")
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    chunk, pos = _take(data, pos, struct.calcsize("<IIdI"), "grid header")
    version, n, L, count = struct.unpack("<IIdI", chunk)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if n < 8 or n % 2 or not (math.isfinite(L) and L > 0):
        raise SnapshotError(f"corrupt header: invalid grid n={n}, L={L}")
    layout = []
    for _ in range(count):
        chunk, pos = _take(data, pos, 4, "field name length")
        (size,) = struct.unpack("<I", chunk)
        raw, pos = _take(data, pos, size, "field name")
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SnapshotError("corrupt header: field name is not UTF-8") from exc
        chunk, pos = _take(data, pos, 4, "component count")
        (comps,) = struct.unpack("<I", chunk)
        if comps not in (1, 3):
            raise SnapshotError(f"corrupt header: field {name!r} has {comps} components")
        layout.append((name, comps))
    expected = sum(2 * 8 * n**3 * c for _, c in layout)
    actual = len(data) - pos
    if actual != expected:
        kind = "truncated payload" if actual < expected else "trailing bytes after payload"
        raise SnapshotError(f"{kind}: expected {expected} bytes, found {actual}")
    fields: dict[str, np.ndarray] = {}
    for name, comps in layout:
        nbytes = 16 * n**3 * comps
        arr = np.frombuffer(data, dtype=_DTYPE, count=comps * n**3, offset=pos).reshape(comps, n, n, n)
        pos += nbytes
        arr = arr.astype(np.complex128)
        fields[name] = arr if comps == 3 else arr[0]
    snap = Snapshot(n, L, fields, version)
    if check_hermitian:
        grid = snap.grid
        for name, arr in fields.items():
            defect = hermitian_defect(grid, arr)
            if defect > HERMITIAN_TOL:
                raise SnapshotError(f"field {name!r} violates Hermitian symmetry (relative defect {defect:.3e})")
    return snap


# --------------------------------------------------------------------------
# reports

TRACE_COLUMNS = ("iter", "H1_u", "H1_w", "sqrtEps_H2_u", "sqrtEps_H2_w", "update_norm", "r_mom", "r_mic", "energy_gap")
LEDGER_COLUMNS = ("R", "term_name", "exact_value", "majorant_value")


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def trace_rows(trace) -> list[tuple]:
    return trace.rows()


def ledger_rows(reports) -> list[tuple]:
    """One row per (R, term) in the order of ``verification.LIOUVILLE_TERMS``."""
    from .verification import LIOUVILLE_TERMS

    rows = []
    for rep in reports:
        for name in LIOUVILLE_TERMS:
            rows.append((rep.R, name, rep.terms[name], rep.majorants.get(name, float("nan"))))
    return rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "as_dict"):
        return _jsonable(obj.as_dict())
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable({k: getattr(obj, k) for k in obj.__dataclass_fields__})
    return obj


def write_report(path: str | Path, report, fmt: str | None = None) -> None:
    """Write a trace, a ledger list, a table ``(columns, rows)`` or a dict.

    ``fmt`` defaults to the file suffix. CSV column sets: traces use
    ``TRACE_COLUMNS``; Liouville ledgers use ``LEDGER_COLUMNS``.
    """
    from .solver import SolveTrace
    from .verification import LedgerReport

    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    if fmt == "json":
        if isinstance(report, SolveTrace):
            payload = {"columns": list(TRACE_COLUMNS), "rows": [list(r) for r in report.rows()],
                       "converged": report.converged, "reason": report.reason}
        else:
            payload = report
        path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n", encoding="utf-8")
        return
    if isinstance(report, SolveTrace):
        text = csv_text(TRACE_COLUMNS, report.rows())
    elif isinstance(report, list) and (not report or isinstance(report[0], LedgerReport)):
        text = csv_text(LEDGER_COLUMNS, ledger_rows(report))
    elif isinstance(report, tuple) and len(report) == 2:
        text = csv_text(report[0], report[1])
    else:
        raise TypeError(f"cannot write {type(report).__name__} as CSV")
    path.write_text(text, encoding="utf-8")
