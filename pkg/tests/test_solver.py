import numpy as np
import pytest
import scipy.sparse as sp

from mahjb.bellman import DirectionSet
from mahjb.experiments import quartic, quartic_rhs
from mahjb.operator import DiscreteOperator, build_stencils
from mahjb.solver import NewtonConfig, SolverError, initial_guess, newton_solve, solve_sparse


def make_op(mesh, poly, f, g, m=2, n_theta=8):
    st = build_stencils(mesh, poly, DirectionSet(n_theta), m)
    return DiscreteOperator(st, f, g)


def test_solve_sparse_examples(rng):
    b = rng.normal(size=7)
    np.testing.assert_array_equal(solve_sparse(sp.identity(7), b), b)
    n = 100
    A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    x = rng.normal(size=n)
    np.testing.assert_allclose(solve_sparse(A, A @ x), x, rtol=1e-10)
    with pytest.raises(SolverError):
        solve_sparse(sp.csc_matrix((3, 3)), np.ones(3))


def test_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(step_tol=0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)


def test_initial_guess_zero_and_affine(lshape, lshape_mesh):
    zero = lambda p: np.zeros(len(p))
    np.testing.assert_array_equal(initial_guess(make_op(lshape_mesh, lshape, 0.0, zero)), 0.0)
    aff = lambda p: 0.5 - p[:, 0] + 2 * p[:, 1]
    u0 = initial_guess(make_op(lshape_mesh, lshape, 0.0, aff))
    np.testing.assert_allclose(u0, aff(lshape_mesh.nodes), atol=1e-9)


def test_initial_guess_quadratic(square, grid16):
    q = lambda p: 0.5 * (p[:, 0] ** 2 + p[:, 1] ** 2)
    op = make_op(grid16, square, 2.0, q, m=2)
    u0 = initial_guess(op)
    k = op.st.k_nominal
    assert np.max(np.abs(u0 - q(grid16.nodes))) <= 10 * (grid16.h**2 + k**2)


def test_fixed_point_takes_one_iteration(lshape, lshape_mesh):
    aff = lambda p: 1.0 + p[:, 0]
    op = make_op(lshape_mesh, lshape, 0.0, aff)
    u, rep = newton_solve(op, aff(lshape_mesh.nodes))
    assert rep.iterations == 1 and rep.converged
    assert rep.step_norms[0] <= 1e-14


def test_quartic_coarse_solve(lshape, lshape_mesh):
    op = make_op(lshape_mesh, lshape, quartic_rhs(lshape_mesh.nodes), quartic, m=2, n_theta=32)
    u, rep = newton_solve(op)
    assert rep.converged and rep.iterations <= 12
    assert rep.final_step < 5e-8
    np.testing.assert_array_equal(u[op.boundary], quartic(lshape_mesh.nodes[op.boundary]))
    diag = op.jacobian(u)[0].diagonal().max()
    assert np.max(np.abs(op.residual(u).values)) <= 1e3 * 5e-8 * diag
    # the active policy has settled by the end
    assert rep.policy_changes[-1] < 0.01 * op.st.n_interior


def test_second_start_reaches_same_solution(lshape, lshape_mesh1):
    g = quartic
    op = make_op(lshape_mesh1, lshape, quartic_rhs(lshape_mesh1.nodes), g, m=4)
    u1, r1 = newton_solve(op)
    start = np.zeros(lshape_mesh1.n_nodes)
    u2, r2 = newton_solve(op, start)
    assert r1.converged and r2.converged
    assert np.max(np.abs(u1 - u2)) <= 1e-6


def test_iteration_cap_is_reported(lshape, lshape_mesh1):
    op = make_op(lshape_mesh1, lshape, quartic_rhs(lshape_mesh1.nodes), quartic, m=4)
    u, rep = newton_solve(op, cfg=NewtonConfig(max_iter=1))
    assert not rep.converged and rep.iterations == 1
    assert np.all(np.isfinite(u))
