"""Plain-text polygon, mesh and solution files.

polygon:   ``polygon V`` then V lines ``x y`` (counter-clockwise)
mesh:      ``mesh N T`` then N lines ``x y b`` and T lines ``i j k`` (0-based)
solution:  ``solution N`` then N lines ``x y u``

Floats are written with ``repr`` so they round-trip exactly and never depend
on the locale.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import DomainPolygon
from .mesh import TriMesh, mesh_from_arrays


class FormatError(ValueError):
    pass


def _f(x) -> str:
    return repr(float(x))


def _header(lines, keyword, nfields):
    if not lines:
        raise FormatError("empty file")
    head = lines[0].split()
    if len(head) != nfields + 1 or head[0] != keyword:
        raise FormatError(f"expected header '{keyword}' with {nfields} count(s), got {lines[0]!r}")
    try:
        return [int(v) for v in head[1:]]
    except ValueError as exc:
        raise FormatError(f"bad header counts in {lines[0]!r}") from exc


def _rows(lines, start, count, ncols, dtype):
    if len(lines) < start + count:
        raise FormatError("file ends before all rows were read")
    try:
        arr = np.array([ln.split() for ln in lines[start : start + count]], dtype=dtype)
    except ValueError as exc:
        raise FormatError(f"malformed row in lines {start + 1}-{start + count}") from exc
    if count and arr.shape != (count, ncols):
        raise FormatError(f"expected {ncols} columns per row")
    return arr.reshape(count, ncols)


def _read_lines(path) -> list[str]:
    return [ln for ln in Path(path).read_text().splitlines() if ln.strip()]


def format_polygon(poly: DomainPolygon) -> str:
    out = [f"polygon {len(poly.vertices)}"]
    out += [f"{_f(x)} {_f(y)}" for x, y in poly.vertices]
    return "\n".join(out) + "\n"


def write_polygon(path, poly: DomainPolygon) -> None:
    Path(path).write_text(format_polygon(poly))


def read_polygon(path) -> DomainPolygon:
    lines = _read_lines(path)
    (nv,) = _header(lines, "polygon", 1)
    v = _rows(lines, 1, nv, 2, float)
    return DomainPolygon(v, family_tag=Path(path).stem)


def format_mesh(mesh: TriMesh) -> str:
    out = [f"mesh {mesh.n_nodes} {mesh.n_triangles}"]
    out += [f"{_f(x)} {_f(y)} {int(b)}" for (x, y), b in zip(mesh.nodes, mesh.boundary_node)]
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    return "\n".join(out) + "\n"


def write_mesh(path, mesh: TriMesh) -> None:
    Path(path).write_text(format_mesh(mesh))


def read_mesh(path) -> TriMesh:
    lines = _read_lines(path)
    n, t = _header(lines, "mesh", 2)
    nodes = _rows(lines, 1, n, 3, float)
    tris = _rows(lines, 1 + n, t, 3, np.int64)
    if t and (tris.min() < 0 or tris.max() >= n):
        raise FormatError("triangle refers to a node index out of range")
    return mesh_from_arrays(nodes[:, :2], tris, nodes[:, 2] != 0)


def write_solution(path, nodes, u) -> None:
    out = [f"solution {len(nodes)}"]
    out += [f"{_f(x)} {_f(y)} {_f(v)}" for (x, y), v in zip(nodes, u)]
    Path(path).write_text("\n".join(out) + "\n")


def read_solution(path):
    lines = _read_lines(path)
    (n,) = _header(lines, "solution", 1)
    arr = _rows(lines, 1, n, 3, float)
    return arr[:, :2], arr[:, 2]
