"""Output writers: legacy ASCII VTK and CSV, written atomically."""
from __future__ import annotations

import csv
import io as _io
import os
import tempfile
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArgumentError, OutputError


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


# -- VTK -------------------------------------------------------------------------
def _fmt(x: float) -> str:
    return repr(float(f"{x:.12g}")) if np.isfinite(x) else "nan"


def vtk_text(vertices: np.ndarray, triangles: np.ndarray, fields: Mapping[str, np.ndarray], title: str = "fpsi") -> str:
    """Legacy ASCII UnstructuredGrid with triangle cells and point data.

    Fields of shape (nv,) become SCALARS, fields of shape (nv, 2) or (nv, 3)
    become VECTORS (padded with z = 0).
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    nv, nt = len(vertices), len(triangles)
    out = _io.StringIO()
    w = out.write
    w(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    w(f"POINTS {nv} double\n")
    for x, y in vertices:
        w(f"{x:.12g} {y:.12g} 0\n")
    w(f"CELLS {nt} {4 * nt}\n")
    for a, b, c in triangles:
        w(f"3 {a} {b} {c}\n")
    w(f"CELL_TYPES {nt}\n")
    w("5\n" * nt)
    if fields:
        w(f"POINT_DATA {nv}\n")
    for name, values in fields.items():
        if " " in name or not name:
            raise ArgumentError(f"invalid field name {name!r}")
        a = np.asarray(values, dtype=float)
        if a.shape == (nv,):
            w(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in a:
                w(f"{v:.12g}\n")
        elif a.ndim == 2 and a.shape[0] == nv and a.shape[1] in (2, 3):
            w(f"VECTORS {name} double\n")
            for row in a:
                z = row[2] if len(row) == 3 else 0.0
                w(f"{row[0]:.12g} {row[1]:.12g} {z:.12g}\n")
        else:
            raise ArgumentError(f"field {name!r} has shape {a.shape}, expected ({nv},) or ({nv}, 2|3)")
    return out.getvalue()


def write_vtk(mesh, fields: Mapping[str, np.ndarray], path: str | os.PathLike, vertices: np.ndarray | None = None) -> None:
    """Write nodal fields on ``mesh`` (optionally at displaced ``vertices``)."""
    v = mesh.vertices if vertices is None else vertices
    atomic_write_text(path, vtk_text(v, mesh.triangles, fields))


def read_vtk(path: str | os.PathLike) -> dict:
    """Minimal reader for files produced by :func:`write_vtk`."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    lines = iter(tokens[4:])
    out: dict = {"fields": {}}
    nv = 0
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            nv = int(parts[1])
            out["points"] = np.array([next(lines).split() for _ in range(nv)], dtype=float)
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = np.array([next(lines).split() for _ in range(n)], dtype=np.int64)[:, 1:]
        elif key == "CELL_TYPES":
            out["cell_types"] = np.array([next(lines) for _ in range(int(parts[1]))], dtype=np.int64)
        elif key == "SCALARS":
            next(lines)
            out["fields"][parts[1]] = np.array([next(lines) for _ in range(nv)], dtype=float)
        elif key == "VECTORS":
            out["fields"][parts[1]] = np.array([next(lines).split() for _ in range(nv)], dtype=float)
    return out


# -- CSV -------------------------------------------------------------------------
def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ArgumentError(f"row has {len(row)} values for {len(columns)} columns")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(report, path: str | os.PathLike) -> None:
    """Write an error report (``.columns`` and ``.table()``) or a (columns, rows) pair."""
    if hasattr(report, "columns") and hasattr(report, "table"):
        columns, rows = report.columns, report.table()
    else:
        columns, rows = report
    atomic_write_text(path, csv_text(list(columns), rows))


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[float]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, rows
