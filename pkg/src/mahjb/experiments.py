"""Problem catalogue, error norms and the convergence-study driver."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .bellman import DirectionSet
from .geometry import DomainPolygon, DomainSpec, build_domain
from .mesh import TriMesh, generate_mesh, refine_uniform
from .operator import DiscreteOperator, build_stencils
from .solver import NewtonConfig, newton_solve

DEFAULT_M = (2, 4, 8, 16, 32, 64)
_EDGE_TOL = 1e-9


# -- scalar fields -------------------------------------------------------------
# Every field maps an (n, 2) array of points to an (n,) array.


def _x(p):
    return p[:, 0]


def _y(p):
    return p[:, 1]


def quartic(p):
    return (_x(p) ** 2 + _y(p) ** 2) ** 2


def quartic_rhs(p):
    # det D^2 (|x|^4) = 48 |x|^4, so f = 2 sqrt(48) |x|^2
    return 8.0 * math.sqrt(3.0) * (_x(p) ** 2 + _y(p) ** 2)


def x1_quartic_minus_one(p):
    return _x(p) ** 4 - 1.0


def x2_squared_minus_one(p):
    return _y(p) ** 2 - 1.0


def _bump_on_vertical(x_edge):
    def g(p):
        x, y = _x(p), _y(p)
        on_gamma = (np.abs(x - x_edge) <= _EDGE_TOL) & (y >= 0) & (y <= 1)
        return np.where(on_gamma, y * (1.0 - y), x**4 - 1.0)

    return g


def bent_square_data(p):
    x, y = _x(p), _y(p)
    return np.where(np.abs(x) > np.abs(y), y**2 - 1.0, 1.0 - x**2)


def bent_square_data_literal(p):
    # switches on x1 > x2 instead of |x1| > |x2|; the interior limit is then not x2^2 - 1
    x, y = _x(p), _y(p)
    return np.where(x > y, y**2 - 1.0, 1.0 - x**2)


def half_norm_squared(p):
    return 0.5 * (_x(p) ** 2 + _y(p) ** 2)


def affine(p):
    return 0.3 + 1.5 * _x(p) - 0.7 * _y(p)


def constant(value):
    def c(p):
        return np.full(len(p), float(value))

    return c


FIELDS: dict[str, Callable] = {
    "zero": constant(0.0),
    "one": constant(1.0),
    "two": constant(2.0),
    "quartic": quartic,
    "quartic_rhs": quartic_rhs,
    "x1_quartic_minus_one": x1_quartic_minus_one,
    "x2_squared_minus_one": x2_squared_minus_one,
    "bump_right_edge": _bump_on_vertical(1.0),
    "bump_left_edge": _bump_on_vertical(-1.0),
    "bent_square_data": bent_square_data,
    "bent_square_data_literal": bent_square_data_literal,
    "half_norm_squared": half_norm_squared,
    "affine": affine,
}


# -- subdomains for error measurement -----------------------------------------


def whole_domain(p):
    return np.ones(len(p), dtype=bool)


SUBDOMAINS: dict[str, Callable] = {
    "all": whole_domain,
    "x1_below_0.95": lambda p: _x(p) < 0.95,
    "x1_above_-0.95": lambda p: _x(p) > -0.95,
    "inner_square_0.75": lambda p: (np.abs(_x(p)) < 0.75) & (np.abs(_y(p)) < 0.75),
}


@dataclass(frozen=True)
class ProblemData:
    f: str
    g: str
    reference: str | None = None
    omega: str | None = None

    def __post_init__(self):
        for name in (self.f, self.g, self.reference):
            if name is not None and name not in FIELDS:
                raise KeyError(f"unknown field {name!r}")
        if (self.reference is None) != (self.omega is None):
            raise ValueError("reference and omega must be given together")
        if self.omega is not None and self.omega not in SUBDOMAINS:
            raise KeyError(f"unknown subdomain {self.omega!r}")

    def f_at(self, pts) -> np.ndarray:
        vals = np.asarray(FIELDS[self.f](np.asarray(pts, dtype=float)), dtype=float)
        if np.any(vals < 0):
            raise ValueError(f"right-hand side {self.f!r} is negative somewhere")
        return vals

    @property
    def g_fn(self) -> Callable:
        return FIELDS[self.g]

    @property
    def reference_fn(self) -> Callable | None:
        return None if self.reference is None else FIELDS[self.reference]

    @property
    def omega_fn(self) -> Callable | None:
        return None if self.omega is None else SUBDOMAINS[self.omega]


@dataclass(frozen=True)
class ExperimentSpec:
    """One domain, one data set, and the (level, m) grid to sweep.

    ``h0`` is the target edge length of the level-0 mesh; curved boundaries
    are sampled at the same step and never re-sampled.
    """

    name: str
    domain: DomainSpec
    data: ProblemData
    h0: float
    refinements: tuple = (0, 1, 2, 3)
    multipliers: tuple = DEFAULT_M
    n_theta: int = 32
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    clip: str = "asymmetric"
    boundary_values: str = "exact"

    def __post_init__(self):
        if any(m < 1 for m in self.multipliers):
            raise ValueError("multipliers must be >= 1")
        if any(r < 0 for r in self.refinements):
            raise ValueError("refinement levels must be >= 0")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")

    def polygon(self) -> DomainPolygon:
        return build_domain(self.domain, self.h0)

    def with_options(self, **kw) -> "ExperimentSpec":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


# Bent-square domains in table order: convex c = 3, 10, 100; square; concave c = 100, 10, 3.
BENT_SQUARE_DOMAINS = (
    DomainSpec("bent_square_convex", 3.0),
    DomainSpec("bent_square_convex", 10.0),
    DomainSpec("bent_square_convex", 100.0),
    DomainSpec("square"),
    DomainSpec("bent_square_concave", 100.0),
    DomainSpec("bent_square_concave", 10.0),
    DomainSpec("bent_square_concave", 3.0),
)

_BENT_DATA = ProblemData("zero", "bent_square_data", "x2_squared_minus_one", "inner_square_0.75")


def catalog() -> dict[str, list[ExperimentSpec]]:
    """The five experiments; the bent-square entry holds its seven domains."""
    lshape = DomainSpec("l_shape")
    return {
        "quartic-lshape": [
            ExperimentSpec(
                "quartic-lshape",
                lshape,
                ProblemData("quartic_rhs", "quartic", "quartic", "all"),
                h0=0.3,
            )
        ],
        "bakelman-disc-square": [
            ExperimentSpec(
                "bakelman-disc-square",
                DomainSpec("disc_union_square"),
                ProblemData("zero", "bump_right_edge", "x1_quartic_minus_one", "x1_below_0.95"),
                h0=0.2,
            )
        ],
        "nonconvex-lshape": [
            ExperimentSpec(
                "nonconvex-lshape",
                lshape,
                ProblemData("zero", "bump_left_edge", "x1_quartic_minus_one", "x1_above_-0.95"),
                h0=0.3,
            )
        ],
        "heart": [
            ExperimentSpec(
                "heart",
                DomainSpec("heart"),
                ProblemData("one", "zero"),
                h0=0.15,
                multipliers=(8,),
            )
        ],
        "bent-square": [
            ExperimentSpec(
                f"bent-square-{i}", d, _BENT_DATA, h0=0.2, multipliers=(4, 8, 16)
            )
            for i, d in enumerate(BENT_SQUARE_DOMAINS, start=1)
        ],
    }


def experiment_names() -> list[str]:
    names = []
    for key, specs in catalog().items():
        names.append(key)
        if len(specs) > 1:
            names.extend(s.name for s in specs)
    return names


def get_experiments(name: str) -> list[ExperimentSpec]:
    cat = catalog()
    if name in cat:
        return cat[name]
    for specs in cat.values():
        for s in specs:
            if s.name == name:
                return [s]
    raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(experiment_names())}")


# -- errors and studies ---------------------------------------------------------


def rel_linf_error(mesh: TriMesh, u, reference: Callable, omega: Callable) -> float:
    """max |u - ref| / max |ref| over the mesh nodes lying in ``omega``."""
    inside = np.asarray(omega(mesh.nodes), dtype=bool)
    if not np.any(inside):
        raise ValueError("no mesh nodes in the error subdomain")
    ref = reference(mesh.nodes[inside])
    return float(np.max(np.abs(np.asarray(u)[inside] - ref)) / np.max(np.abs(ref)))


@dataclass
class ConvergenceRecord:
    experiment: str
    level: int
    dofs: int
    h: float
    m: float
    rel_linf_error: float | None
    newton_iterations: int
    converged: bool
    wall_time: float
    u_max: float = float("nan")


@dataclass
class Solve:
    """Everything produced by one (mesh, m) solve."""

    spec: ExperimentSpec
    mesh: TriMesh
    poly: DomainPolygon
    op: DiscreteOperator
    u: np.ndarray
    report: object
    wall_time: float

    @property
    def m(self) -> float:
        return self.op.st.m

    @property
    def error(self) -> float | None:
        d = self.spec.data
        if d.reference is None:
            return None
        return rel_linf_error(self.mesh, self.u, d.reference_fn, d.omega_fn)


def meshes(spec: ExperimentSpec, poly: DomainPolygon | None = None):
    """Yield ``(level, mesh)`` for the requested levels, refining incrementally."""
    poly = poly or spec.polygon()
    mesh = generate_mesh(poly, spec.h0)
    wanted = sorted(set(spec.refinements))
    for level in range(wanted[-1] + 1):
        if level > 0:
            mesh = refine_uniform(mesh)
        if level in wanted:
            yield level, mesh


def solve_on_mesh(spec, mesh, poly, m, u0=None) -> Solve:
    t0 = time.perf_counter()
    dirs = DirectionSet(spec.n_theta)
    st = build_stencils(mesh, poly, dirs, m, clip=spec.clip, boundary_values=spec.boundary_values)
    op = DiscreteOperator(st, spec.data.f_at(mesh.nodes), spec.data.g_fn)
    u, rep = newton_solve(op, u0, spec.newton)
    return Solve(spec, mesh, poly, op, u, rep, time.perf_counter() - t0)


def _record(spec, level, mesh, s: Solve) -> ConvergenceRecord:
    return ConvergenceRecord(
        spec.name,
        level,
        mesh.n_nodes,
        mesh.h,
        s.m,
        s.error,
        s.report.iterations,
        s.report.converged,
        s.wall_time,
        float(np.max(np.abs(s.u))),
    )


def run_study(spec: ExperimentSpec, workers: int = 1) -> list[ConvergenceRecord]:
    """Solve every (level, m) cell; records come back ordered by level, then m.

    With ``workers > 1`` the cells of a level run in a thread pool.  The
    sparse factorisations release the GIL, and the output order is fixed, so
    the records do not depend on the worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    poly = spec.polygon()
    records = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for level, mesh in meshes(spec, poly):
            mesh.locator  # build once before threads share the mesh
            solves = pool.map(lambda m: solve_on_mesh(spec, mesh, poly, m), spec.multipliers)
            records.extend(_record(spec, level, mesh, s) for s in solves)
    return records


def best_per_level(records: list[ConvergenceRecord]) -> dict[int, ConvergenceRecord]:
    """Record with the smallest error at each level (smallest m on ties)."""
    best = {}
    for r in sorted(records, key=lambda r: (r.level, r.m)):
        if r.rel_linf_error is None:
            continue
        cur = best.get(r.level)
        if cur is None or r.rel_linf_error < cur.rel_linf_error:
            best[r.level] = r
    return best


CSV_HEADER = ("experiment", "level", "dofs", "h", "m", "rel_linf_error", "newton_iters",
              "converged", "wall_time_s")


def records_to_csv(records, timings: bool = False) -> str:
    """CSV text; wall times are left empty unless ``timings`` so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(
            [
                r.experiment,
                r.level,
                r.dofs,
                repr(float(r.h)),
                f"{r.m:g}",
                "" if r.rel_linf_error is None else f"{r.rel_linf_error:.5e}",
                r.newton_iterations,
                "true" if r.converged else "false",
                f"{r.wall_time:.3f}" if timings else "",
            ]
        )
    return buf.getvalue()
