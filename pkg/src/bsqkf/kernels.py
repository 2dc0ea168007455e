"""RBF kernel, Gram matrices and closed-form Gaussian kernel expectations.

Every kernel quantity includes the scale factor ``alpha**2``, so the
expectations are consistent with :func:`rbf_eval` and scale exactly by
``s**2`` when ``alpha`` is multiplied by ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit, select
from .polybasis import MultiIndexBasis
from .quadrature import UnitSigmaPointSet

__all__ = [
    "RbfParams",
    "KernelConditioningError",
    "rbf_eval",
    "gram_matrix",
    "kernel_diag_expectation",
    "kernel_mean_embedding",
    "kernel_double_expectation",
    "kernel_poly_cross_expectation",
    "mc_expectation_oracle",
]

JITTER_START = 1e-12
JITTER_MAX = 1e-8


class KernelConditioningError(np.linalg.LinAlgError):
    """Gram matrix could not be factorised even with the maximum jitter."""


@dataclass(frozen=True)
class RbfParams:
    """Scale ``alpha`` and per-dimension lengthscales of the RBF kernel."""

    scale: float
    lengthscales: tuple

    def __post_init__(self):
        ell = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if self.scale <= 0 or any(v <= 0 for v in ell):
            raise ValueError("RBF scale and lengthscales must be strictly positive")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "lengthscales", ell)

    @classmethod
    def isotropic(cls, scale: float, lengthscale: float, dim: int) -> "RbfParams":
        return cls(scale, (lengthscale,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def ell(self, dim: int) -> np.ndarray:
        """Lengthscales as an array, broadcasting a single value to ``dim``."""
        ell = np.asarray(self.lengthscales, dtype=float)
        if ell.size == 1:
            return np.full(dim, ell[0])
        if ell.size != dim:
            raise ValueError(f"kernel has {ell.size} lengthscales, inputs have dimension {dim}")
        return ell


def _as_columns(points) -> np.ndarray:
    if isinstance(points, UnitSigmaPointSet):
        return points.points
    return np.atleast_2d(np.asarray(points, dtype=float))


def rbf_eval(params: RbfParams, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch {x.shape} vs {y.shape}")
    ell = params.ell(x.size)
    return params.scale**2 * math.exp(-0.5 * float(np.sum(((x - y) / ell) ** 2)))


# --- Gram matrix -----------------------------------------------------------


@njit
def _gram_loops(pts, ell, scale2):
    dim, n = pts.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = scale2
        for j in range(i + 1, n):
            r2 = 0.0
            for d in range(dim):
                t = (pts[d, i] - pts[d, j]) / ell[d]
                r2 += t * t
            v = scale2 * np.exp(-0.5 * r2)
            out[i, j] = v
            out[j, i] = v
    return out


def _gram_numpy(pts, ell, scale2):
    z = pts / ell[:, None]
    diff = z[:, :, None] - z[:, None, :]
    return scale2 * np.exp(-0.5 * np.sum(diff**2, axis=0))


_gram = select(_gram_loops, _gram_numpy)


def raw_gram(params: RbfParams, points) -> np.ndarray:
    """Unjittered ``(N, N)`` Gram matrix."""
    pts = _as_columns(points)
    return _gram(np.ascontiguousarray(pts), params.ell(pts.shape[0]), params.scale**2)


def gram_matrix(params: RbfParams, points):
    """Jittered Gram matrix and its lower Cholesky factor.

    Jitter starts at ``1e-12 * alpha**2`` on the diagonal and grows tenfold
    up to ``1e-8 * alpha**2``.

    Returns
    -------
    K : (N, N) ndarray
    L : (N, N) ndarray
        Lower triangular, ``K = L @ L.T``.
    """
    base = raw_gram(params, points)
    scale2 = params.scale**2
    eye = np.eye(base.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        K = base + jitter * scale2 * eye
        try:
            return K, np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise KernelConditioningError(
        f"Gram matrix of {base.shape[0]} points is not positive definite with jitter {JITTER_MAX:g}*alpha^2"
    )


# --- expectations under xi ~ N(0, I) ---------------------------------------


def kernel_diag_expectation(params: RbfParams) -> float:
    """``E[k(xi, xi)]``; the RBF kernel is constant on its diagonal."""
    return params.scale**2


def kernel_double_expectation(params: RbfParams, dim: int) -> float:
    """``E[k(xi, xi')]`` for independent standard Gaussian ``xi, xi'``."""
    ell = params.ell(dim)
    return params.scale**2 * float(np.prod(ell / np.sqrt(ell**2 + 2.0)))


@njit
def _cross_loops(pts, idx, ell, scale2):
    dim, n = pts.shape
    nq = idx.shape[0]
    amax = 0
    for q in range(nq):
        for d in range(dim):
            if idx[q, d] > amax:
                amax = idx[q, d]
    # mom[d, a] = E[(mu + s z)^a] for the current point
    mom = np.empty((dim, amax + 1))
    out = np.empty((n, nq))
    for i in range(n):
        logc = 0.0
        for d in range(dim):
            l2 = ell[d] * ell[d]
            c = pts[d, i]
            s2 = l2 / (1.0 + l2)
            mu = c / (1.0 + l2)
            logc += 0.5 * np.log(s2) - 0.5 * c * c / (1.0 + l2)
            mom[d, 0] = 1.0
            if amax >= 1:
                mom[d, 1] = mu
            for a in range(1, amax):
                mom[d, a + 1] = mu * mom[d, a] + a * s2 * mom[d, a - 1]
        pref = scale2 * np.exp(logc)
        for q in range(nq):
            v = pref
            for d in range(dim):
                v *= mom[d, idx[q, d]]
            out[i, q] = v
    return out


def _cross_numpy(pts, idx, ell, scale2):
    dim, n = pts.shape
    amax = int(idx.max())
    l2 = (ell**2)[:, None]
    s2 = l2 / (1.0 + l2)
    mu = pts / (1.0 + l2)
    logc = np.sum(0.5 * np.log(s2) - 0.5 * pts**2 / (1.0 + l2), axis=0)
    mom = np.empty((amax + 1, dim, n))
    mom[0] = 1.0
    if amax >= 1:
        mom[1] = mu
    for a in range(1, amax):
        mom[a + 1] = mu * mom[a] + a * s2 * mom[a - 1]
    # gather mom[idx[q, d], d, n] -> (Q, D, N)
    gathered = mom[idx, np.arange(dim)[None, :], :]
    return scale2 * np.exp(logc)[:, None] * np.prod(gathered, axis=1).T


_cross = select(_cross_loops, _cross_numpy)


def kernel_poly_cross_expectation(params: RbfParams, points, basis: MultiIndexBasis) -> np.ndarray:
    """``E[k(xi, xi_n) xi**alpha_q]`` as an ``(N, Q)`` matrix.

    Per axis, completing the square turns the integrand into a Gaussian
    ``N(mu, s^2)`` with ``s^2 = l^2/(1+l^2)`` and ``mu = c/(1+l^2)``; the
    polynomial part is then a raw moment of that Gaussian, computed with
    ``M_{a+1} = mu M_a + a s^2 M_{a-1}``. The exponential prefactors are
    accumulated in log space.
    """
    pts = _as_columns(points)
    if pts.shape[0] != basis.dim:
        raise ValueError(f"points have dimension {pts.shape[0]}, basis has {basis.dim}")
    idx = np.ascontiguousarray(basis.indices)
    return _cross(np.ascontiguousarray(pts), idx, params.ell(pts.shape[0]), params.scale**2)


def kernel_mean_embedding(params: RbfParams, points) -> np.ndarray:
    """``E[k(xi, xi_n)]`` for every point, shape ``(N,)``."""
    pts = _as_columns(points)
    zero = MultiIndexBasis(np.zeros((1, pts.shape[0]), dtype=np.int64))
    return kernel_poly_cross_expectation(params, pts, zero)[:, 0]


# --- Monte Carlo oracle ----------------------------------------------------


def mc_expectation_oracle(integrand, dim: int, samples: int = 1_000_000, seed=0, batch: int = 50_000):
    """Seeded Monte Carlo estimate of ``E[integrand(xi)]`` for ``xi ~ N(0, I_dim)``.

    ``integrand`` maps an ``(M, dim)`` batch to an ``(M, ...)`` array. Sums
    and sums of squares are accumulated per batch, so array-valued integrands
    with large trailing shapes stay within memory.

    Returns
    -------
    estimate, std_error : ndarray or float
        Sample mean and its standard error, with the integrand's trailing shape.
    """
    if samples < 1000:
        raise ValueError("the oracle needs at least 1000 samples")
    rng = np.random.default_rng(seed)
    total = sq_total = None
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        vals = np.asarray(integrand(rng.standard_normal((m, dim))), dtype=float)
        s, s2 = vals.sum(axis=0), (vals**2).sum(axis=0)
        total = s if total is None else total + s
        sq_total = s2 if sq_total is None else sq_total + s2
        done += m
    mean = total / samples
    var = np.maximum(sq_total / samples - mean**2, 0.0) * samples / (samples - 1)
    se = np.sqrt(var / samples)
    if np.ndim(mean) == 0:
        return float(mean), float(se)
    return mean, se
