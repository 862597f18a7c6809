"""Planar polygon predicates, ray clipping and the domain constructors.

Every computational domain is a simple counter-clockwise polygon.  Curved
boundary pieces are sampled once at a fixed arc-length step and the
resulting polygon is then kept for all refinement levels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-12
MIN_ARC_SAMPLES = 8

FAMILIES = (
    "l_shape",
    "disc_union_square",
    "heart",
    "bent_square_convex",
    "bent_square_concave",
    "square",
    "unit_square_test",
)

_ALIASES = {
    "lshape": "l_shape",
    "disc_square": "disc_union_square",
    "unit_square": "unit_square_test",
}


class GeometryError(ValueError):
    """Raised for invalid domain parameters or geometric queries."""


class Containment(enum.IntEnum):
    EXTERIOR = 0
    BOUNDARY = 1
    INTERIOR = 2


@dataclass(frozen=True)
class DomainSpec:
    family: str
    c: float | None = None

    def __post_init__(self):
        fam = self.family.replace("-", "_").lower()
        fam = _ALIASES.get(fam, fam)
        if fam not in FAMILIES:
            raise GeometryError(f"unknown domain family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam.startswith("bent_square"):
            if self.c is None or not self.c > 1:
                raise GeometryError("bent-square parameter c must satisfy c > 1")

    @property
    def tag(self) -> str:
        if self.c is None:
            return self.family
        return f"{self.family}(c={self.c:g})"


@dataclass(frozen=True, eq=False)
class DomainPolygon:
    """Simple CCW polygon; ``vertices`` has shape (V, 2)."""

    vertices: np.ndarray
    family_tag: str = "custom"
    sampling_h: float = math.inf
    _edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 two-dimensional vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        a = v
        b = np.roll(v, -1, axis=0)
        object.__setattr__(self, "_edges", (a, b))
        if self.signed_area() <= 0:
            raise GeometryError("polygon must be counter-clockwise with positive area")

    @property
    def edge_start(self) -> np.ndarray:
        return self._edges[0]

    @property
    def edge_end(self) -> np.ndarray:
        return self._edges[1]

    def __len__(self):
        return len(self.vertices)

    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return self.signed_area()

    def is_simple(self) -> bool:
        """Brute-force check that no two non-adjacent edges intersect."""
        a, b = self.edge_start, self.edge_end
        n = len(a)
        for i in range(n):
            others = [j for j in range(n) if j != i and j != (i + 1) % n and j != (i - 1) % n]
            if not others:
                continue
            j = np.array(others)
            if np.any(_segments_intersect(a[i], b[i], a[j], b[j])):
                return False
        return True

    def is_convex(self, tol: float = 1e-12) -> bool:
        e = self.edge_end - self.edge_start
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool(np.all(cross >= -tol))

    def distance_to_boundary(self, points) -> np.ndarray:
        return boundary_distance(np.atleast_2d(points), self)


def _segments_intersect(p1, p2, q1, q2):
    """Closed-segment intersection test of one segment against many."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
            c[..., 0] - a[..., 0]
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0)


def boundary_distance(points: np.ndarray, poly: DomainPolygon, chunk: int = 4096) -> np.ndarray:
    """Euclidean distance from each point to the polygon boundary."""
    points = np.asarray(points, dtype=float)
    a, b = poly.edge_start, poly.edge_end
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s : s + chunk, None, :]
        t = np.clip(np.einsum("qij,ij->qi", p - a, e) / ee, 0.0, 1.0)
        d = p - (a + t[..., None] * e)
        out[s : s + chunk] = np.sqrt(np.min(np.einsum("qij,qij->qi", d, d), axis=1))
    return out


def classify_points(points, poly: DomainPolygon, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorised :func:`point_in_polygon`; returns an int array of Containment codes."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a, b = poly.edge_start, poly.edge_end
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ay, by = a[:, 1], b[:, 1]
    # crossing-number test with a ray towards +x
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = a[:, 0] + (py - ay) * (b[:, 0] - a[:, 0]) / (by - ay)
    inside = np.count_nonzero(straddle & (px < xcross), axis=1) % 2 == 1
    codes = np.where(inside, Containment.INTERIOR, Containment.EXTERIOR).astype(int)
    on_bdy = boundary_distance(pts, poly) <= tol
    codes[on_bdy] = Containment.BOUNDARY
    return codes


def point_in_polygon(p, poly: DomainPolygon) -> Containment:
    return Containment(int(classify_points(np.asarray(p, dtype=float)[None, :], poly)[0]))


def ray_exit_distance(
    origins: np.ndarray, directions: np.ndarray, poly: DomainPolygon, chunk: int = 8192
) -> np.ndarray:
    """Distance along each ray to its first contact with the polygon boundary.

    Touching a vertex counts as contact, so rays that graze a re-entrant
    corner stop there.  Edges parallel to the ray are skipped: a ray running
    along an edge first meets it at a vertex shared with a non-parallel edge.
    """
    origins = np.asarray(origins, dtype=float)
    directions = np.asarray(directions, dtype=float)
    a, b = poly.edge_start, poly.edge_end
    e = b - a
    elen = np.sqrt(np.einsum("ij,ij->i", e, e))
    out = np.empty(len(origins))
    for s in range(0, len(origins), chunk):
        o = origins[s : s + chunk, None, :]
        d = directions[s : s + chunk, None, :]
        ao = a[None] - o
        denom = d[..., 0] * e[None, :, 1] - d[..., 1] * e[None, :, 0]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = (ao[..., 0] * e[None, :, 1] - ao[..., 1] * e[None, :, 0]) / denom
            u = (ao[..., 0] * d[..., 1] - ao[..., 1] * d[..., 0]) / denom
        ok = (np.abs(denom) > 1e-15 * elen) & (t >= 0) & (u >= -1e-12) & (u <= 1 + 1e-12)
        out[s : s + chunk] = np.min(np.where(ok, t, np.inf), axis=1)
    return out


def clip_rays(
    origins: np.ndarray,
    directions: np.ndarray,
    max_len: float,
    poly: DomainPolygon,
    origin_distance: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorised :func:`clip_ray` without the interior check on the origins.

    ``origin_distance`` (distance of each origin to the boundary) lets rays that
    cannot reach the boundary skip the edge scan.
    """
    origins = np.asarray(origins, dtype=float)
    directions = np.asarray(directions, dtype=float)
    arm = np.full(len(origins), float(max_len))
    if origin_distance is None:
        near = np.ones(len(origins), dtype=bool)
    else:
        near = np.asarray(origin_distance) < max_len
    if np.any(near):
        t = ray_exit_distance(origins[near], directions[near], poly)
        arm[near] = np.minimum(arm[near], t)
    return arm


def clip_ray(origin, direction, max_len: float, poly: DomainPolygon) -> float:
    """Longest arm ``t <= max_len`` with the segment ``[origin, origin + t*direction]``
    inside the closed polygon."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if point_in_polygon(origin, poly) is not Containment.INTERIOR:
        raise GeometryError(f"ray origin {origin.tolist()} is not interior to the polygon")
    if not max_len > 0:
        raise GeometryError("max_len must be positive")
    direction = direction / np.hypot(*direction)
    t = float(ray_exit_distance(origin[None], direction[None], poly)[0])
    return min(float(max_len), t)


# -- domain constructors -----------------------------------------------------


def _arc(center, radius, start, end, ccw, h):
    """Samples strictly between ``start`` and ``end`` on a circle, at step ~h."""
    cx, cy = center
    a0 = math.atan2(start[1] - cy, start[0] - cx)
    a1 = math.atan2(end[1] - cy, end[0] - cx)
    if ccw:
        sweep = (a1 - a0) % (2 * math.pi) or 2 * math.pi
    else:
        sweep = -((a0 - a1) % (2 * math.pi) or 2 * math.pi)
    n = math.ceil(abs(sweep) * radius / h - 1e-9)
    if n < MIN_ARC_SAMPLES:
        raise GeometryError(
            f"sampling_h={h:g} gives {n} samples on an arc of length "
            f"{abs(sweep) * radius:.4g}; at least {MIN_ARC_SAMPLES} are required"
        )
    ang = a0 + sweep * np.arange(1, n) / n
    return np.column_stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)])


def _assemble(pieces):
    """pieces: list of (corner, arc_samples_or_None) in boundary order."""
    pts = []
    for corner, arc in pieces:
        pts.append(np.asarray(corner, dtype=float)[None])
        if arc is not None and len(arc):
            pts.append(arc)
    return np.vstack(pts)


def convex_bent_radius(c: float) -> float:
    """Radius of a circle centred at distance c that passes through the two far corners."""
    return math.sqrt((c + 1) ** 2 + 1)


def concave_bent_radius(c: float) -> float:
    """Radius of a circle centred at distance c that passes through the two near corners."""
    return math.sqrt((c - 1) ** 2 + 1)


def _bent_square(c, h, convex):
    corners = [(1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0)]
    # side i runs from corners[i] to corners[i+1]: right, top, left, bottom
    outward = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    pieces = []
    for i, (ox, oy) in enumerate(outward):
        start, end = corners[i], corners[(i + 1) % 4]
        if convex:
            center, r = (-c * ox, -c * oy), convex_bent_radius(c)
        else:
            center, r = (c * ox, c * oy), concave_bent_radius(c)
        pieces.append((start, _arc(center, r, start, end, convex, h)))
    return _assemble(pieces)


def build_domain(spec: DomainSpec, sampling_h: float) -> DomainPolygon:
    if not sampling_h > 0:
        raise GeometryError("sampling_h must be positive")
    fam, h = spec.family, sampling_h
    if fam == "l_shape":
        v = [(1, -1), (1, 1), (-1, 1), (-1, 0), (0, 0), (0, -1)]
    elif fam == "square":
        v = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    elif fam == "unit_square_test":
        v = [(0, 0), (1, 0), (1, 1), (0, 1)]
    elif fam == "disc_union_square":
        v = _assemble(
            [
                ((1, 0), None),
                ((1, 1), None),
                ((0, 1), _arc((0, 0), 1.0, (0, 1), (1, 0), True, h)),
            ]
        )
    elif fam == "heart":
        v = _assemble(
            [
                ((0, -1), _arc((0, -0.5), 0.5, (0, -1), (0, 0), True, h)),
                ((0, 0), _arc((0, 0.5), 0.5, (0, 0), (0, 1), True, h)),
                ((0, 1), _arc((0, 0), 1.0, (0, 1), (0, -1), True, h)),
            ]
        )
    elif fam == "bent_square_convex":
        v = _bent_square(spec.c, h, convex=True)
    elif fam == "bent_square_concave":
        v = _bent_square(spec.c, h, convex=False)
    else:  # pragma: no cover - DomainSpec validates the family
        raise GeometryError(fam)
    return DomainPolygon(np.asarray(v, dtype=float), family_tag=spec.tag, sampling_h=h)


def contains_exact(spec: DomainSpec, points) -> np.ndarray:
    """Membership in the analytic (unsampled) domain, for oracles and tests."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = p[:, 0], p[:, 1]
    fam = spec.family
    if fam == "l_shape":
        return ((x > 0) & (x < 1) & (y > -1) & (y < 1)) | ((x > -1) & (x < 1) & (y > 0) & (y < 1))
    if fam == "square":
        return (np.abs(x) < 1) & (np.abs(y) < 1)
    if fam == "unit_square_test":
        return (x > 0) & (x < 1) & (y > 0) & (y < 1)
    if fam == "disc_union_square":
        return (x**2 + y**2 < 1) | ((x > 0) & (x < 1) & (y > 0) & (y < 1))
    if fam == "heart":
        right = (x >= 0) & ((x**2 + (y - 0.5) ** 2 < 0.25) | (x**2 + (y + 0.5) ** 2 < 0.25))
        left = (x <= 0) & (x**2 + y**2 < 1)
        return right | left
    centers = np.array([(spec.c, 0), (0, spec.c), (-spec.c, 0), (0, -spec.c)], dtype=float)
    d2 = (x[:, None] - centers[:, 0]) ** 2 + (y[:, None] - centers[:, 1]) ** 2
    if fam == "bent_square_convex":
        return np.all(d2 < convex_bent_radius(spec.c) ** 2, axis=1)
    sq = (np.abs(x) < 1) & (np.abs(y) < 1)
    return sq & np.all(d2 > concave_bent_radius(spec.c) ** 2, axis=1)
