"""Wide-stencil semi-Lagrangian discretisation of H(D^2 u, f) = 0.

At every interior node and along every stencil axis the second directional
derivative is replaced by a (possibly asymmetric) central difference

    2 [ v+ / (k+ (k+ + k-)) - u / (k+ k-) + v- / (k- (k+ + k-)) ]

whose endpoint values v+- are P1 interpolants of u, or Dirichlet data where
an arm had to be clipped at the boundary.  All differences are stored as one
sparse matrix ``D`` acting on nodal values plus a boundary coefficient per
arm, so the residual and its semi-smooth Jacobian are sparse algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .bellman import DirectionSet, pair_sup
from .geometry import DomainPolygon, GeometryError, clip_rays
from .mesh import TriMesh

CLIP_TOL = 1e-12
CLIP_MODES = ("asymmetric", "symmetric", "distance")
BOUNDARY_VALUE_MODES = ("exact", "interpolate")
TIE_RTOL = 1e-11

FORWARD, BACKWARD = 0, 1


@dataclass(frozen=True)
class StencilArm:
    length: float
    point: np.ndarray
    boundary: bool
    node_ids: tuple = ()
    weights: tuple = ()
    g_value: float | None = None

    def value(self, u) -> float:
        if self.boundary:
            if self.g_value is None:
                raise ValueError("boundary arm without a g value")
            return float(self.g_value)
        return float(np.dot(self.weights, np.asarray(u)[list(self.node_ids)]))


def second_difference(node_value: float, fwd: StencilArm, bwd: StencilArm, u) -> float:
    kp, km = fwd.length, bwd.length
    if not (kp > 0 and km > 0):
        raise ValueError("stencil arms must have positive length")
    vp, vm = fwd.value(u), bwd.value(u)
    return 2.0 * (vp / (kp * (kp + km)) - node_value / (kp * km) + vm / (km * (kp + km)))


def arm_weights(kp, km):
    """Coefficients (forward, centre, backward) of the unequal-arm second difference."""
    return 2.0 / (kp * (kp + km)), -2.0 / (kp * km), 2.0 / (km * (kp + km))


@dataclass(eq=False)
class StencilTable:
    """Clipped arms for every interior node along every stencil axis.

    Arrays indexed ``[side, axis, i]`` with side 0 forward and 1 backward.
    ``angle_axes[j]`` gives the axis indices of ``e(theta_j)`` and of its
    orthogonal complement.
    """

    mesh: TriMesh
    poly: DomainPolygon
    dirs: DirectionSet
    m: float
    h: float
    clip: str
    interior: np.ndarray
    axis_vectors: np.ndarray
    angle_axes: np.ndarray
    length: np.ndarray
    on_boundary: np.ndarray
    endpoint: np.ndarray
    tri: np.ndarray
    weights: np.ndarray
    D: sp.csr_matrix
    bcoef: np.ndarray
    clipped: np.ndarray | None = None
    boundary_values: str = "exact"

    @property
    def k_nominal(self) -> float:
        return self.m * self.h

    @property
    def n_axes(self) -> int:
        return len(self.axis_vectors)

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def boundary_constant(self, g: Callable) -> np.ndarray:
        """Contribution of Dirichlet data at clipped endpoints, one entry per row of ``D``."""
        const = np.zeros(self.length.shape[1:])
        for side in (FORWARD, BACKWARD):
            mask = self.on_boundary[side]
            if np.any(mask):
                const[mask] += self.bcoef[side][mask] * g(self.endpoint[side][mask])
        return const.ravel()

    def arm(self, side: int, axis: int, i: int, g: Callable | None = None) -> StencilArm:
        """Arm of the ``i``-th interior node (index into ``interior``)."""
        pt = self.endpoint[side, axis, i].copy()
        if self.on_boundary[side, axis, i]:
            gv = None if g is None else float(np.asarray(g(pt[None]))[0])
            return StencilArm(float(self.length[side, axis, i]), pt, True, g_value=gv)
        t = self.tri[side, axis, i]
        return StencilArm(
            float(self.length[side, axis, i]),
            pt,
            False,
            tuple(int(n) for n in self.mesh.triangles[t]),
            tuple(self.weights[side, axis, i]),
        )

    def segments(self):
        """(origins, endpoints) of every arm, flattened."""
        x = self.mesh.nodes[self.interior]
        o = np.broadcast_to(x, self.endpoint.shape).reshape(-1, 2)
        return o, self.endpoint.reshape(-1, 2)


def stencil_axes(dirs: DirectionSet):
    """Distinct axes (modulo sign) used by the angles and their complements.

    Axis angles are integer multiples of pi/(2 n_theta); theta_j is code 2j,
    theta_j + pi/2 is code 2j + n_theta, both taken modulo 2 n_theta.
    """
    n = dirs.n_theta
    j = np.arange(n)
    codes = np.stack([(2 * j) % (2 * n), (2 * j + n) % (2 * n)], axis=1)
    uniq, inv = np.unique(codes, return_inverse=True)
    ang = uniq * np.pi / (2 * n)
    return np.column_stack([np.cos(ang), np.sin(ang)]), inv.reshape(n, 2)


def build_stencils(
    mesh: TriMesh,
    poly: DomainPolygon,
    dirs: DirectionSet,
    m: float,
    clip: str = "asymmetric",
    boundary_values: str = "exact",
) -> StencilTable:
    """Clip every arm against ``poly`` and assemble the difference matrix.

    ``boundary_values="exact"`` evaluates g at a clipped endpoint; with
    ``"interpolate"`` the endpoint is located in the mesh like any other and
    picks up the P1 interpolant of the nodal boundary data instead.
    """
    if not m >= 1:
        raise ValueError("stencil multiplier m must be >= 1")
    if clip not in CLIP_MODES:
        raise ValueError(f"clip must be one of {CLIP_MODES}")
    if boundary_values not in BOUNDARY_VALUE_MODES:
        raise ValueError(f"boundary_values must be one of {BOUNDARY_VALUE_MODES}")
    interior = mesh.interior_nodes
    X = mesh.nodes[interior]
    nI = len(X)
    axis_vec, angle_axes = stencil_axes(dirs)
    nA = len(axis_vec)
    k = m * mesh.h

    dist = poly.distance_to_boundary(X)
    dirs_arr = np.stack([axis_vec, -axis_vec])  # (2, A, 2)
    origins = np.broadcast_to(X, (2, nA, nI, 2)).reshape(-1, 2)
    rays = np.broadcast_to(dirs_arr[:, :, None, :], (2, nA, nI, 2)).reshape(-1, 2)
    odist = np.broadcast_to(dist, (2, nA, nI)).ravel()
    exit_len = clip_rays(origins, rays, k, poly, odist).reshape(2, nA, nI)
    if np.any(exit_len <= 0):
        raise GeometryError("a stencil arm was clipped to zero length")
    clipped = exit_len < k - CLIP_TOL
    if clip == "asymmetric":
        length = exit_len
        on_boundary = clipped
    elif clip == "distance":
        length = np.broadcast_to(np.minimum(k, dist), exit_len.shape).copy()
        on_boundary = np.zeros(exit_len.shape, dtype=bool)
    else:
        shortest = exit_len.min(axis=0)
        length = np.broadcast_to(shortest, exit_len.shape).copy()
        on_boundary = clipped & (exit_len <= shortest)

    endpoint = X[None, None] + length[..., None] * dirs_arr[:, :, None, :]
    tri = np.full(length.shape, -1, dtype=np.int64)
    weights = np.zeros(length.shape + (3,))
    reached_boundary = on_boundary.copy()
    if boundary_values == "interpolate":
        on_boundary = np.zeros_like(on_boundary)
    inner = ~on_boundary
    if np.any(inner):
        t, w = mesh.locator.locate(endpoint[inner])
        tri[inner] = t
        weights[inner] = w

    kp, km = length[FORWARD], length[BACKWARD]
    cf, c0, cb = arm_weights(kp, km)
    rows = np.arange(nA * nI).reshape(nA, nI)
    r_parts = [rows.ravel()]
    c_parts = [np.broadcast_to(interior, (nA, nI)).ravel()]
    v_parts = [c0.ravel()]
    bcoef = np.zeros_like(length)
    for side, coef in ((FORWARD, cf), (BACKWARD, cb)):
        ins = inner[side]
        bcoef[side] = np.where(on_boundary[side], coef, 0.0)
        nodes3 = mesh.triangles[tri[side][ins]]
        r_parts.append(np.repeat(rows[ins], 3))
        c_parts.append(nodes3.ravel())
        v_parts.append((coef[ins][:, None] * weights[side][ins]).ravel())
    D = sp.csr_matrix(
        (np.concatenate(v_parts), (np.concatenate(r_parts), np.concatenate(c_parts))),
        shape=(nA * nI, mesh.n_nodes),
    )
    D.sum_duplicates()
    D.eliminate_zeros()
    return StencilTable(
        mesh, poly, dirs, float(m), float(mesh.h), clip, interior, axis_vec, angle_axes,
        length, on_boundary, endpoint, tri, weights, D, bcoef, reached_boundary, boundary_values,
    )


@dataclass
class ResidualResult:
    values: np.ndarray
    active_angle: np.ndarray
    active_lambda: np.ndarray


class DiscreteOperator:
    """Residual ``F(u)`` and frozen-control Jacobian for one (stencils, f, g) triple.

    ``u`` is always a full nodal vector; boundary entries are Dirichlet data and
    only interior entries are unknowns.
    """

    def __init__(self, stencils: StencilTable, f_values, g: Callable):
        self.st = stencils
        mesh = stencils.mesh
        f_values = np.broadcast_to(np.asarray(f_values, dtype=float), (mesh.n_nodes,))
        self.f = f_values[stencils.interior].copy()
        if np.any(self.f < 0):
            raise ValueError("f must be non-negative at interior nodes")
        self.g = g
        self.boundary = np.flatnonzero(mesh.boundary_node)
        self.g_boundary = np.asarray(g(mesh.nodes[self.boundary]), dtype=float)
        self.const = stencils.boundary_constant(g)
        self._D_int = stencils.D[:, stencils.interior].tocsr()
        self._D_bdy = stencils.D[:, self.boundary].tocsr()

    @property
    def n_nodes(self) -> int:
        return self.st.mesh.n_nodes

    def with_boundary(self, u_interior) -> np.ndarray:
        u = np.empty(self.n_nodes)
        u[self.st.interior] = u_interior
        u[self.boundary] = self.g_boundary
        return u

    def second_differences(self, u) -> np.ndarray:
        """Array (axes, interior nodes) of directional second differences."""
        d = self.st.D @ np.asarray(u, dtype=float) + self.const
        return d.reshape(self.st.n_axes, self.st.n_interior)

    def control_values(self, u):
        """Per-angle optimal values and weights, each of shape (n_theta, interior nodes)."""
        return self._control_values(self.second_differences(u))

    def _control_values(self, delta):
        ax = self.st.angle_axes
        return pair_sup(delta[ax[:, 0]], delta[ax[:, 1]], self.f[None, :])

    def residual(self, u) -> ResidualResult:
        """F at every interior node with the active control.

        The active angle is the smallest index whose value is within roundoff
        (TIE_RTOL relative to the node's largest difference) of the maximum.
        A strict argmax would let rounding decide between angles that tie in
        exact arithmetic, and the policy would flicker at converged states.
        """
        delta = self.second_differences(u)
        vals, lams = self._control_values(delta)
        best = vals.max(axis=0)
        tol = TIE_RTOL * (1.0 + np.abs(delta).max(axis=0) + self.f)
        j = np.argmax(vals >= (best - tol)[None, :], axis=0)
        cols = np.arange(len(j))
        return ResidualResult(best, j, lams[j, cols])

    def _rows(self, angle):
        nI = self.st.n_interior
        ax = self.st.angle_axes[angle]
        base = np.arange(nI)
        return ax[:, 0] * nI + base, ax[:, 1] * nI + base

    def linearize(self, angle, lam):
        """Frozen-control operator as ``(J, b)`` with ``L(u) = J @ u[interior] + b``."""
        angle = np.broadcast_to(np.asarray(angle, dtype=np.int64), (self.st.n_interior,))
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (self.st.n_interior,))
        if np.any((lam < 0) | (lam > 1)) or np.any(angle < 0) or np.any(angle >= self.st.dirs.n_theta):
            raise ValueError("inconsistent active-control table")
        r1, r2 = self._rows(angle)
        L1 = sp.diags(lam)
        L2 = sp.diags(1.0 - lam)
        J = -(L1 @ self._D_int[r1] + L2 @ self._D_int[r2])
        Jb = -(L1 @ self._D_bdy[r1] + L2 @ self._D_bdy[r2])
        b = (
            Jb @ self.g_boundary
            - lam * self.const[r1]
            - (1.0 - lam) * self.const[r2]
            + self.f * np.sqrt(lam * (1.0 - lam))
        )
        return J.tocsr(), b

    def jacobian(self, u, active: ResidualResult | None = None):
        if active is None:
            active = self.residual(u)
        return self.linearize(active.active_angle, active.active_lambda)


def residual(stencils, dirs, u, f_values, g) -> ResidualResult:
    if dirs is not stencils.dirs and dirs.n_theta != stencils.dirs.n_theta:
        raise ValueError("direction set does not match the stencil table")
    return DiscreteOperator(stencils, f_values, g).residual(u)


def jacobian(stencils, dirs, u, f_values, g, active: ResidualResult | None = None):
    if dirs is not stencils.dirs and dirs.n_theta != stencils.dirs.n_theta:
        raise ValueError("direction set does not match the stencil table")
    return DiscreteOperator(stencils, f_values, g).jacobian(u, active)
