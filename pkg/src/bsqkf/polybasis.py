"""Monomial bases, alternant matrices and their Gaussian expectations.

A basis is an ordered list of multi-indices; basis function ``q`` is the
monomial ``x ** alpha_q``. The alternant matrix is oriented ``(N, Q)`` with
entry ``(n, q) = phi_q(xi_n)``, so interpolation reads ``v(x)^T V^{-1} f``
and exact mean weights solve ``V^T w = E[v(xi)]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .quadrature import DEFAULT_MAX_POINTS, PointSetSizeError, UnitSigmaPointSet

__all__ = [
    "MultiIndexBasis",
    "ut_basis",
    "gh_max_degree_basis",
    "eval_basis",
    "alternant_matrix",
    "is_unisolvent",
    "gaussian_moment",
    "basis_mean",
    "basis_outer_expectation",
    "cross_expectation_x_basis",
]


@dataclass(frozen=True)
class MultiIndexBasis:
    """Ordered monomial basis.

    Attributes
    ----------
    indices : (Q, D) int ndarray
        Row ``q`` is the multi-index of basis function ``q``.
    """

    indices: np.ndarray

    def __post_init__(self):
        idx = np.atleast_2d(np.asarray(self.indices, dtype=np.int64))
        if idx.shape[0] < 1:
            raise ValueError("basis needs at least one multi-index")
        if np.any(idx < 0):
            raise ValueError("multi-indices must be nonnegative")
        if len({tuple(r) for r in idx}) != idx.shape[0]:
            raise ValueError("multi-indices must be pairwise distinct")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def dim(self) -> int:
        return self.indices.shape[1]

    @property
    def size(self) -> int:
        return self.indices.shape[0]


def ut_basis(dim: int) -> MultiIndexBasis:
    """Basis ``{1, x_1..x_D, x_1^2..x_D^2}`` ordered to match :func:`ut_points`."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    eye = np.eye(dim, dtype=np.int64)
    return MultiIndexBasis(np.vstack([np.zeros((1, dim), dtype=np.int64), eye, 2 * eye]))


def gh_max_degree_basis(dim: int, order: int, max_points: int = DEFAULT_MAX_POINTS) -> MultiIndexBasis:
    """All multi-indices with per-axis degree at most ``order - 1``.

    Lexicographic ordering (first axis slowest), matching :func:`gh_points`.
    """
    if dim < 1 or order < 1:
        raise ValueError("dim and order must be >= 1")
    if order**dim > max_points:
        raise PointSetSizeError(f"basis of size {order**dim} exceeds cap {max_points}")
    return MultiIndexBasis(np.array(list(itertools.product(range(order), repeat=dim))))


def eval_basis(basis: MultiIndexBasis, x) -> np.ndarray:
    """Evaluate all basis monomials at ``x``.

    ``x`` may be a single ``(D,)`` point, returning ``(Q,)``, or a batch of
    ``(M, D)`` points, returning ``(M, Q)``. ``0**0`` is taken as 1.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != basis.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match basis dimension {basis.dim}")
    # (..., 1, D) ** (Q, D) -> (..., Q, D); numpy defines 0.0**0 == 1.0
    return np.prod(x[..., None, :] ** basis.indices, axis=-1)


def alternant_matrix(basis: MultiIndexBasis, points: UnitSigmaPointSet) -> np.ndarray:
    """``(N, Q)`` matrix whose row ``n`` is the basis evaluated at point ``n``."""
    if points.dim != basis.dim:
        raise ValueError(f"points have dimension {points.dim}, basis has {basis.dim}")
    return eval_basis(basis, points.points.T)


def is_unisolvent(basis: MultiIndexBasis, points: UnitSigmaPointSet, tol: float = 1e-10) -> bool:
    """Full-column-rank test on the alternant via relative singular values."""
    s = np.linalg.svd(alternant_matrix(basis, points), compute_uv=False)
    if s.size < basis.size or s[0] == 0.0:
        return False
    return bool(s[-1] > tol * s[0])


def _double_factorial(n: int) -> int:
    # (-1)!! = 0!! = 1
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def gaussian_moment(n) -> np.ndarray:
    """``E[x**n]`` for ``x ~ N(0, 1)``, elementwise over integer ``n``."""
    n = np.asarray(n, dtype=np.int64)
    flat = [float(_double_factorial(int(k) - 1)) if k % 2 == 0 else 0.0 for k in n.ravel()]
    return np.array(flat, dtype=float).reshape(n.shape)


def basis_mean(basis: MultiIndexBasis) -> np.ndarray:
    """``E[v(xi)]``: product over axes of the 1-D Gaussian moments."""
    return np.prod(gaussian_moment(basis.indices), axis=1)


def basis_outer_expectation(basis: MultiIndexBasis) -> np.ndarray:
    """``E[v(xi) v(xi)^T]`` as a ``(Q, Q)`` matrix."""
    idx = basis.indices
    summed = idx[:, None, :] + idx[None, :, :]
    return np.prod(gaussian_moment(summed), axis=-1)


def cross_expectation_x_basis(basis: MultiIndexBasis) -> np.ndarray:
    """``E[xi v(xi)^T]`` as a ``(D, Q)`` matrix.

    Entry ``(d, q)`` is the Gaussian moment of the augmented multi-index
    ``alpha_q + e_d``.
    """
    idx = basis.indices
    eye = np.eye(basis.dim, dtype=np.int64)
    augmented = idx[None, :, :] + eye[:, None, :]
    return np.prod(gaussian_moment(augmented), axis=-1)
