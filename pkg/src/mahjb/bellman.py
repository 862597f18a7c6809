"""The Bellman Hamiltonian of the two-dimensional simple Monge-Ampere operator.

    H(A, f) = sup_{B >= 0, tr B = 1}  -B:A + f sqrt(det B)

A control B is written as lam * e e^T + (1 - lam) e_perp e_perp^T with
e = (cos theta, sin theta), theta in [0, pi).  For a fixed frame the
supremum over lam has a closed form (:func:`pair_sup`), so the only
discretised part of the control set is the angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Angles ``j*pi/n_theta`` with their unit vectors and orthogonal complements."""

    n_theta: int

    def __post_init__(self):
        if int(self.n_theta) != self.n_theta or self.n_theta < 1:
            raise ValueError("n_theta must be a positive integer")

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n_theta) * np.pi / self.n_theta

    @property
    def vectors(self) -> np.ndarray:
        a = self.angles
        return np.column_stack([np.cos(a), np.sin(a)])

    @property
    def perps(self) -> np.ndarray:
        a = self.angles
        return np.column_stack([-np.sin(a), np.cos(a)])


@dataclass(frozen=True)
class ControlChoice:
    angle_index: int
    lam: float

    def matrix(self, dirs: DirectionSet) -> np.ndarray:
        e = dirs.vectors[self.angle_index]
        p = dirs.perps[self.angle_index]
        return self.lam * np.outer(e, e) + (1 - self.lam) * np.outer(p, p)


def _check_f(f):
    if np.any(np.asarray(f) < 0):
        raise ValueError("f must be non-negative")


def pair_sup(d1, d2, f):
    """``max_{lam in [0,1]} -lam*d1 - (1-lam)*d2 + f*sqrt(lam*(1-lam))`` and its maximiser.

    Works elementwise on arrays.  When ``d1 == d2`` and ``f == 0`` every lam is
    optimal and 1/2 is returned.
    """
    _check_f(f)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    s = d2 - d1
    r = np.hypot(s, f)
    value = 0.5 * (r - d1 - d2)
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(r > 0, 0.5 + 0.5 * s / np.where(r > 0, r, 1.0), 0.5)
    if value.ndim == 0:
        return float(value), float(lam)
    return value, lam


def _symmetric(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def hamiltonian_exact(A, f) -> float:
    """H(A, f) from the eigenvalues of the symmetrised ``A``.

    The optimal control shares the eigenvectors of ``A``, so the supremum
    reduces to :func:`pair_sup` on the two eigenvalues.  Zero exactly when
    ``A`` is positive semidefinite with ``det A = (f/2)**2``.
    """
    A = _symmetric(A)
    a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return pair_sup(mean - rad, mean + rad, f)[0]


def hamiltonian_bruteforce(A, f, n_theta: int, n_lambda: int) -> float:
    """Supremum over the tensor grid of angles ``j*pi/n_theta`` and ``lam = l/(n_lambda-1)``."""
    if n_theta < 1 or n_lambda < 2:
        raise ValueError("need n_theta >= 1 and n_lambda >= 2")
    _check_f(f)
    A = _symmetric(A)
    th = np.arange(n_theta) * np.pi / n_theta
    e = np.column_stack([np.cos(th), np.sin(th)])
    p = np.column_stack([-np.sin(th), np.cos(th)])
    q1 = np.einsum("ti,ij,tj->t", e, A, e)
    q2 = np.einsum("ti,ij,tj->t", p, A, p)
    lam = np.arange(n_lambda) / (n_lambda - 1)
    root = np.sqrt(lam * (1 - lam))
    vals = -np.outer(q1, lam) - np.outer(q2, 1 - lam) + f * root
    return float(vals.max())
