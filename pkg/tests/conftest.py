import numpy as np
import pytest

from mahjb.bellman import DirectionSet
from mahjb.geometry import DomainSpec, build_domain
from mahjb.mesh import generate_mesh, mesh_from_arrays, refine_uniform


@pytest.fixture(scope="session")
def lshape():
    return build_domain(DomainSpec("l_shape"), 0.3)


@pytest.fixture(scope="session")
def lshape_mesh(lshape):
    return generate_mesh(lshape, 0.3)


@pytest.fixture(scope="session")
def lshape_mesh1(lshape_mesh):
    return refine_uniform(lshape_mesh)


@pytest.fixture(scope="session")
def square():
    return build_domain(DomainSpec("square"), 1.0)


def structured_square(n):
    """Criss-cross-free structured mesh of [-1, 1]^2 with n cells per side."""
    t = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return mesh_from_arrays(nodes, tris)


@pytest.fixture(scope="session")
def grid16():
    return structured_square(16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def dirs8():
    return DirectionSet(8)


# -- acceptance verdicts ----------------------------------------------------------------

_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def verdict():
    """Record ``verdict(n, passed, detail)``; the lines are printed after the run."""

    def record(number: int, passed: bool, detail: str):
        _VERDICTS[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        ok, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
