"""Field and time-series writers.

Every file is written to a temporary sibling and renamed into place, so an
interrupted run never leaves a truncated artifact behind.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from ..diagnostics import SERIES_COLUMNS
from ..model import pressure

VTK_TRIANGLE = 5


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _vtk_text(mesh, point_data: dict, title="hsfem") -> str:
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_nodes} double\n")
    for x, y in mesh.nodes:
        out.write(f"{_fmt(x)} {_fmt(y)} 0\n")
    ne = mesh.n_elements
    out.write(f"CELLS {ne} {4 * ne}\n")
    for a, b, c in mesh.elements:
        out.write(f"3 {a} {b} {c}\n")
    out.write(f"CELL_TYPES {ne}\n")
    out.write(f"{VTK_TRIANGLE}\n" * ne)
    if point_data:
        out.write(f"POINT_DATA {mesh.n_nodes}\n")
        for name, values in point_data.items():
            out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            out.write("\n".join(_fmt(v) for v in values))
            out.write("\n")
    return out.getvalue()


def write_mesh_vtk(mesh, path) -> Path:
    return atomic_write(path, _vtk_text(mesh, {}, "hsfem mesh"))


def field_arrays(state, k=None):
    n = np.asarray(state.n, dtype=float)
    p = state.p if state.p is not None else pressure(np.maximum(n, 0.0), k)
    return n, np.asarray(p, dtype=float)


def write_field(state, mesh, path, fmt="vtk", k=None) -> Path:
    """Write density and pressure at the nodes as legacy VTK or CSV."""
    n, p = field_arrays(state, k)
    if fmt == "vtk":
        data = {"density": n, "pressure": p, "density_minus_pressure": n - p}
        return atomic_write(path, _vtk_text(mesh, data, f"hsfem t={_fmt(state.t)}"))
    if fmt == "csv":
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x", "y", "density", "pressure"])
        for (x, y), a, b in zip(mesh.nodes, n, p):
            w.writerow([_fmt(x), _fmt(y), _fmt(a), _fmt(b)])
        return atomic_write(path, out.getvalue())
    raise ValueError(f"unknown field format {fmt!r}")


def read_field_csv(path):
    """Inverse of the CSV branch of :func:`write_field`: ``(xy, density, pressure)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2], data[:, 2], data[:, 3]


def write_series(records, path) -> Path:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for r in records:
        w.writerow([v if isinstance(v, (int, np.integer)) else _fmt(v) for v in r.row()])
    return atomic_write(path, out.getvalue())


def write_table(rows: list, columns, path) -> Path:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([row[c] if isinstance(row[c], (str, int, np.integer)) else _fmt(row[c]) for c in columns])
    return atomic_write(path, out.getvalue())


def write_meta(config, path, **extra) -> Path:
    """``key = value`` dump of a run configuration plus extra entries."""
    items = dict(config.as_dict())
    items.update(extra)
    lines = []
    for key, v in items.items():
        if isinstance(v, tuple):
            v = ",".join(_fmt(x) for x in v)
        elif isinstance(v, float):
            v = _fmt(v)
        lines.append(f"{key} = {v}")
    return atomic_write(path, "\n".join(lines) + "\n")
