"""Wide-stencil Bellman-formulation solver for the 2D Monge-Ampere equation on triangular meshes."""

from .bellman import DirectionSet, hamiltonian_bruteforce, hamiltonian_exact, pair_sup
from .experiments import ExperimentSpec, ProblemData, catalog, get_experiments, run_study
from .geometry import DomainPolygon, DomainSpec, build_domain, clip_ray, point_in_polygon
from .mesh import TriMesh, generate_mesh, interpolate, locate_point, refine_uniform
from .operator import DiscreteOperator, build_stencils
from .solver import NewtonConfig, newton_solve

__version__ = "0.1.0"

__all__ = [
    "DirectionSet",
    "DiscreteOperator",
    "DomainPolygon",
    "DomainSpec",
    "ExperimentSpec",
    "NewtonConfig",
    "ProblemData",
    "TriMesh",
    "build_domain",
    "build_stencils",
    "catalog",
    "clip_ray",
    "generate_mesh",
    "get_experiments",
    "hamiltonian_bruteforce",
    "hamiltonian_exact",
    "interpolate",
    "locate_point",
    "newton_solve",
    "pair_sup",
    "point_in_polygon",
    "refine_uniform",
    "run_study",
]
