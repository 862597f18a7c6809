"""Conforming triangular meshes of a domain polygon.

Coarse meshes come from a constrained quality Delaunay mesher; finer ones
by uniform red refinement, which never moves the boundary.  Point location
uses a uniform background grid of triangle buckets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle

from .geometry import DomainPolygon, boundary_distance

LOCATE_TOL = 1e-10


class MeshError(RuntimeError):
    pass


class PointNotFound(MeshError):
    """A query point lies outside the mesh."""


@dataclass(frozen=True)
class InterpolationStencil:
    triangle: int
    node_ids: tuple
    weights: tuple


@dataclass(eq=False)
class TriMesh:
    """Triangulation with ``nodes`` (N, 2) and CCW ``triangles`` (T, 3).

    ``h`` is the nominal mesh size: the average edge length of the level-0
    mesh divided by ``2**level``, so it halves exactly under refinement.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_node: np.ndarray
    boundary_edges: np.ndarray
    level: int = 0
    h: float = 0.0
    _locator: "TriangleLocator | None" = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.h <= 0:
            self.h = average_edge_length(self)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_node)

    @property
    def locator(self) -> "TriangleLocator":
        if self._locator is None:
            self._locator = TriangleLocator(self)
        return self._locator

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> np.ndarray:
        return unique_edges(self.triangles)[0]

    def min_angle(self) -> float:
        """Smallest interior angle of any triangle, in degrees."""
        p = self.nodes[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.einsum("ij,ij->i", u, v) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            )
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
        return float(np.min(angles))


def unique_edges(triangles: np.ndarray):
    """Unique undirected edges and, per triangle, the index of each of its edges.

    Edge ``i`` of a triangle joins local vertices ``i`` and ``(i+1) % 3``.
    """
    t = np.asarray(triangles)
    all_e = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
    all_e = np.sort(all_e, axis=1)
    edges, inverse, counts = np.unique(all_e, axis=0, return_inverse=True, return_counts=True)
    return edges, inverse.reshape(-1, 3), counts


def _finish(nodes, triangles, level=0, h=0.0) -> TriMesh:
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    p = nodes[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cw = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    triangles[cw] = triangles[cw][:, [0, 2, 1]]
    edges, _, counts = unique_edges(triangles)
    if np.any(counts > 2):
        raise MeshError("non-conforming triangulation: an edge has more than two triangles")
    bedges = edges[counts == 1]
    bnode = np.zeros(len(nodes), dtype=bool)
    bnode[bedges.ravel()] = True
    return TriMesh(nodes, triangles, bnode, bedges, level=level, h=h)


def _split_polygon(poly: DomainPolygon, h: float) -> np.ndarray:
    pts = []
    for a, b in zip(poly.edge_start, poly.edge_end):
        n = max(1, math.ceil(np.hypot(*(b - a)) / h - 1e-9))
        s = np.arange(n)[:, None] / n
        pts.append(a + s * (b - a))
    return np.vstack(pts)


def generate_mesh(poly: DomainPolygon, target_h: float, min_angle: float = 25.0) -> TriMesh:
    """Quality constrained-Delaunay mesh of ``poly`` with edges of roughly ``target_h``."""
    if not target_h > 0:
        raise MeshError("target_h must be positive")
    pts = _split_polygon(poly, target_h)
    n = len(pts)
    seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    max_area = 0.6 * target_h**2
    out = triangle.triangulate(
        {"vertices": pts, "segments": seg}, f"pq{min_angle:g}a{max_area:.17g}Q"
    )
    tris = out.get("triangles")
    if tris is None or len(tris) < 2:
        raise MeshError(f"meshing failed for {poly.family_tag} at target_h={target_h:g}")
    mesh = _finish(out["vertices"], tris)
    if not np.any(~mesh.boundary_node):
        raise MeshError("mesh has no interior nodes")
    if np.max(boundary_distance(mesh.nodes[mesh.boundary_node], poly)) > 1e-12:
        raise MeshError("boundary node off the polygon")
    return mesh


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Red refinement: each triangle split into four through its edge midpoints."""
    edges, tri_edges, counts = unique_edges(mesh.triangles)
    n = mesh.n_nodes
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])
    t = mesh.triangles
    m01, m12, m20 = (tri_edges[:, i] + n for i in range(3))
    tris = np.concatenate(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([m01, t[:, 1], m12]),
            np.column_stack([m20, m12, t[:, 2]]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    bnode = np.concatenate([mesh.boundary_node, counts == 1])
    be = edges[counts == 1]
    bmid = np.flatnonzero(counts == 1) + n
    bedges = np.concatenate([np.column_stack([be[:, 0], bmid]), np.column_stack([bmid, be[:, 1]])])
    return TriMesh(nodes, tris, bnode, bedges, level=mesh.level + 1, h=mesh.h / 2)


def refine(mesh: TriMesh, times: int) -> TriMesh:
    for _ in range(times):
        mesh = refine_uniform(mesh)
    return mesh


def average_edge_length(mesh: TriMesh) -> float:
    e = unique_edges(mesh.triangles)[0]
    d = mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]]
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))


class TriangleLocator:
    """Uniform-grid bucket index over triangle bounding boxes."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        p = mesh.nodes[mesh.triangles]
        lo = p.min(axis=1)
        hi = p.max(axis=1)
        self.origin = mesh.nodes.min(axis=0) - 1e-9
        extent = mesh.nodes.max(axis=0) + 1e-9 - self.origin
        cell = 2.0 * average_edge_length(mesh)
        self.shape = np.maximum(1, np.ceil(extent / cell).astype(int))
        self.cell = extent / self.shape
        i0 = self._cell_index(lo)
        i1 = self._cell_index(hi)
        span = i1 - i0 + 1
        cells, tris = [], []
        for dx in range(int(span[:, 0].max())):
            for dy in range(int(span[:, 1].max())):
                ok = (dx < span[:, 0]) & (dy < span[:, 1])
                ix = i0[ok, 0] + dx
                iy = i0[ok, 1] + dy
                cells.append(ix * self.shape[1] + iy)
                tris.append(np.flatnonzero(ok))
        cells = np.concatenate(cells)
        tris = np.concatenate(tris)
        order = np.lexsort((tris, cells))
        cells, tris = cells[order], tris[order]
        ncell = int(self.shape[0] * self.shape[1])
        counts = np.bincount(cells, minlength=ncell)
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        width = int(counts.max())
        table = np.full((ncell, width), -1, dtype=np.int64)
        slot = np.arange(len(cells)) - start[cells]
        table[cells, slot] = tris
        self.table = table
        # affine maps to barycentric coordinates
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.p0 = p[:, 0]
        self.inv = np.stack(
            [np.stack([e2[:, 1], -e2[:, 0]], axis=1), np.stack([-e1[:, 1], e1[:, 0]], axis=1)],
            axis=1,
        ) / det[:, None, None]

    def _cell_index(self, pts):
        ij = np.floor((pts - self.origin) / self.cell).astype(int)
        return np.clip(ij, 0, self.shape - 1)

    def barycentric(self, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
        d = pts - self.p0[tri]
        l12 = np.einsum("...ij,...j->...i", self.inv[tri], d)
        return np.concatenate([1.0 - l12.sum(axis=-1, keepdims=True), l12], axis=-1)

    def locate(self, pts: np.ndarray, tol: float = LOCATE_TOL, chunk: int = 20000):
        """Triangle index and clamped barycentric weights for each point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tri_out = np.empty(len(pts), dtype=np.int64)
        w_out = np.empty((len(pts), 3))
        for s in range(0, len(pts), chunk):
            q = pts[s : s + chunk]
            ij = self._cell_index(q)
            cand = self.table[ij[:, 0] * self.shape[1] + ij[:, 1]]
            valid = cand >= 0
            c = np.where(valid, cand, 0)
            w = self.barycentric(c, q[:, None, :])
            score = np.where(valid, w.min(axis=-1), -np.inf)
            best = np.argmax(score, axis=1)
            rows = np.arange(len(q))
            if np.any(score[rows, best] < -tol):
                bad = q[np.flatnonzero(score[rows, best] < -tol)[0]]
                raise PointNotFound(f"point {bad.tolist()} lies outside the mesh")
            wb = np.clip(w[rows, best], 0.0, None)
            w_out[s : s + chunk] = wb / wb.sum(axis=1, keepdims=True)
            tri_out[s : s + chunk] = c[rows, best]
        return tri_out, w_out


def locate_point(mesh: TriMesh, p) -> InterpolationStencil:
    tri, w = mesh.locator.locate(np.asarray(p, dtype=float)[None, :])
    t = int(tri[0])
    return InterpolationStencil(t, tuple(int(i) for i in mesh.triangles[t]), tuple(w[0]))


def interpolate(mesh: TriMesh, u: np.ndarray, p) -> float:
    st = locate_point(mesh, p)
    return float(np.dot(st.weights, np.asarray(u)[list(st.node_ids)]))


def interpolate_many(mesh: TriMesh, u: np.ndarray, pts) -> np.ndarray:
    tri, w = mesh.locator.locate(pts)
    return np.einsum("ij,ij->i", w, np.asarray(u)[mesh.triangles[tri]])


def mesh_from_arrays(nodes, triangles, boundary=None) -> TriMesh:
    """Build a mesh from imported arrays; ``boundary`` flags are cross-checked."""
    mesh = _finish(nodes, triangles)
    if boundary is not None and not np.array_equal(np.asarray(boundary, bool), mesh.boundary_node):
        raise MeshError("boundary flags disagree with the mesh topology")
    return mesh


def boundary_polygon(mesh: TriMesh) -> DomainPolygon:
    """The mesh boundary as a polygon (requires a single boundary loop)."""
    nxt = {}
    for a, b in mesh.boundary_edges:
        nxt.setdefault(int(a), []).append(int(b))
        nxt.setdefault(int(b), []).append(int(a))
    start = int(mesh.boundary_edges[0, 0])
    loop = [start]
    prev, cur = None, start
    while True:
        cands = [v for v in nxt[cur] if v != prev]
        if len(nxt[cur]) != 2:
            raise MeshError("mesh boundary is not a single simple loop")
        prev, cur = cur, cands[0]
        if cur == start:
            break
        loop.append(cur)
    if len(loop) != len(mesh.boundary_edges):
        raise MeshError("mesh boundary has more than one loop")
    v = mesh.nodes[loop]
    x, y = v[:, 0], v[:, 1]
    if np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y) < 0:
        v = v[::-1]
    return DomainPolygon(v, family_tag="mesh-boundary")
