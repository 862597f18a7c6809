"""Semi-smooth Newton (policy iteration) for the discrete Bellman equation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operator import DiscreteOperator

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    step_tol: float = 5e-8
    max_iter: int = 50

    def __post_init__(self):
        if not self.step_tol > 0:
            raise ValueError("step_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class NewtonReport:
    iterations: int = 0
    step_norms: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    converged: bool = False
    policy_changes: list = field(default_factory=list)

    @property
    def final_step(self) -> float:
        return self.step_norms[-1] if self.step_norms else float("nan")


def solve_sparse(matrix, rhs, rtol: float = 1e-12, refinements: int = 3) -> np.ndarray:
    """Direct sparse LU solve, with a few steps of iterative refinement if needed."""
    A = sp.csc_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorisation failed: {exc}") from exc
    x = lu.solve(b)
    bnorm = np.max(np.abs(b)) if b.size else 0.0
    for _ in range(refinements):
        r = b - A @ x
        if not np.all(np.isfinite(r)):
            break
        if np.max(np.abs(r), initial=0.0) <= rtol * bnorm:
            break
        x = x + lu.solve(r)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear system is numerically singular")
    return x


def initial_guess(op: DiscreteOperator) -> np.ndarray:
    """Solution of the linear problem with the control frozen at angle 0, lam = 1/2."""
    J, b = op.linearize(0, 0.5)
    return op.with_boundary(solve_sparse(J, -b))


def newton_solve(op: DiscreteOperator, u0=None, cfg: NewtonConfig = NewtonConfig()):
    """Full-step semi-smooth Newton iteration; returns ``(u, NewtonReport)``.

    Stops when the infinity norm of the Newton step drops below ``cfg.step_tol``.
    Running out of iterations is reported through ``report.converged``.
    """
    if u0 is None:
        u = initial_guess(op)
    else:
        u = np.array(u0, dtype=float)
        u[op.boundary] = op.g_boundary
    interior = op.st.interior
    report = NewtonReport()
    prev_angle = None
    for it in range(1, cfg.max_iter + 1):
        res = op.residual(u)
        J, _ = op.linearize(res.active_angle, res.active_lambda)
        delta = solve_sparse(J, -res.values)
        u[interior] += delta
        step = float(np.max(np.abs(delta), initial=0.0))
        report.iterations = it
        report.step_norms.append(step)
        report.residual_norms.append(float(np.max(np.abs(res.values), initial=0.0)))
        if prev_angle is not None:
            report.policy_changes.append(int(np.count_nonzero(res.active_angle != prev_angle)))
        prev_angle = res.active_angle
        logger.debug("newton %d: step %.3e residual %.3e", it, step, report.residual_norms[-1])
        if step < cfg.step_tol:
            report.converged = True
            break
    return u, report
