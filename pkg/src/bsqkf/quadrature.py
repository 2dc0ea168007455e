"""Unit sigma-point sets for the standard Gaussian N(0, I).

Three families are provided: the unscented transform (UT), the
spherical-radial (cubature) rule and the tensor-product Gauss-Hermite rule.
Points are stored column-wise in a ``(D, N)`` array.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UnitSigmaPointSet",
    "PointSetSizeError",
    "DEFAULT_MAX_POINTS",
    "ut_points",
    "spherical_radial_points",
    "gh_points_1d",
    "gh_points",
    "hermite_e",
]

DEFAULT_MAX_POINTS = 100_000


class PointSetSizeError(ValueError):
    """Raised when a tensor-product rule would exceed the point cap."""


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class UnitSigmaPointSet:
    """Unit sigma-points and their classical weights.

    Attributes
    ----------
    points : (D, N) ndarray
        Columns are the unit sigma-points.
    weights : (N,) ndarray
        Classical quadrature weights, summing to one.
    rule : str
        Short name of the generating family (``'ut'``, ``'sr'``, ``'gh'``).
    """

    points: np.ndarray
    weights: np.ndarray
    rule: str = "custom"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[1] != w.size:
            raise ValueError(f"{pts.shape[1]} points but {w.size} weights")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    @property
    def num_points(self) -> int:
        return self.points.shape[1]


def ut_points(dim: int, kappa: float) -> UnitSigmaPointSet:
    """Unscented transform points with ``c = dim + kappa``.

    Ordering: the centre, then ``+sqrt(c) e_d`` for d = 1..D, then
    ``-sqrt(c) e_d`` for d = 1..D.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    c = dim + kappa
    if c <= 0:
        raise ValueError(f"kappa={kappa} gives c = dim + kappa = {c} <= 0")
    eye = np.eye(dim)
    pts = np.sqrt(c) * np.hstack([np.zeros((dim, 1)), eye, -eye])
    w = np.full(2 * dim + 1, 1.0 / (2.0 * c))
    w[0] = kappa / c
    return UnitSigmaPointSet(pts, w, rule="ut")


def spherical_radial_points(dim: int) -> UnitSigmaPointSet:
    """Third-degree spherical-radial rule: ``2D`` points ``±sqrt(D) e_d``, weights ``1/(2D)``."""
    ut = ut_points(dim, 0.0)
    return UnitSigmaPointSet(ut.points[:, 1:], ut.weights[1:], rule="sr")


def hermite_e(n: int, x):
    """Probabilists' Hermite polynomials ``He_n(x)`` and ``He_{n-1}(x)``.

    Uses the three-term recurrence ``He_{k+1} = x He_k - k He_{k-1}``.
    """
    x = np.asarray(x, dtype=float)
    prev, cur = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        prev, cur = cur, x * cur - k * prev
    return cur, prev


def gh_points_1d(order: int):
    """Roots and weights of the ``order``-point Gauss-Hermite rule for N(0, 1).

    Roots come from the eigenvalues of the symmetric tridiagonal Jacobi
    matrix (Golub-Welsch) and are polished by one Newton step on ``He_p``.
    Weights are ``p! / (p^2 He_{p-1}(x)^2)``, evaluated in log space.

    Returns
    -------
    roots : (p,) ndarray
        Sorted ascending.
    weights : (p,) ndarray
    """
    p = int(order)
    if p < 1:
        raise ValueError("order must be >= 1")
    if p == 1:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1, p, dtype=float))
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    roots = np.linalg.eigvalsh(jacobi)
    he_p, he_pm1 = hermite_e(p, roots)
    roots = roots - he_p / (p * he_pm1)  # He_p' = p He_{p-1}
    # exact symmetry about the origin
    roots = 0.5 * (roots - roots[::-1])
    _, he_pm1 = hermite_e(p, roots)
    log_w = math.lgamma(p + 1) - 2.0 * math.log(p) - 2.0 * np.log(np.abs(he_pm1))
    return roots, np.exp(log_w)


def gh_points(dim: int, order: int, max_points: int = DEFAULT_MAX_POINTS) -> UnitSigmaPointSet:
    """Tensor-product Gauss-Hermite rule with ``order**dim`` points.

    Points are enumerated lexicographically in the per-axis root index with
    the first axis varying slowest.
    """
    if dim < 1 or order < 1:
        raise ValueError("dim and order must be >= 1")
    if order**dim > max_points:
        raise PointSetSizeError(
            f"Gauss-Hermite grid with order {order} in {dim} dimensions has {order**dim} points "
            f"(cap {max_points}); tensor-product rules grow exponentially with dimension"
        )
    roots, w1 = gh_points_1d(order)
    idx = np.array(list(itertools.product(range(order), repeat=dim)), dtype=int)
    pts = roots[idx].T
    w = np.prod(w1[idx], axis=1)
    return UnitSigmaPointSet(pts, w, rule="gh")
