"""Moment transforms: weight construction and application.

All transforms share one representation, :class:`TransformWeights`, holding
mean weights ``w``, covariance weights ``Wc``, cross-covariance weights
``Wcc`` and the expected model variance (EMV). For input moments ``(m, P)``
with ``P = L L^T`` and evaluations ``Psi[n, e] = f_e(m + L xi_n)``::

    mu = Psi^T w
    S  = Psi^T Wc Psi - mu mu^T + diag(emv)
    C  = L Wcc Psi

Classical rules have ``Wc = diag(w)``, ``Wcc = Xi diag(w)`` and zero EMV.
The Bayes-Sard rules derive all three weight blocks from a polynomial
basis and add a kernel-dependent (or user-supplied) EMV.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .kernels import (
    RbfParams,
    kernel_diag_expectation,
    kernel_double_expectation,
    kernel_mean_embedding,
    kernel_poly_cross_expectation,
    raw_gram,
)
from .polybasis import (
    MultiIndexBasis,
    alternant_matrix,
    basis_mean,
    basis_outer_expectation,
    cross_expectation_x_basis,
)
from .quadrature import UnitSigmaPointSet

__all__ = [
    "TransformWeights",
    "GaussianMoments",
    "TransformError",
    "UnisolvencyError",
    "InputCovarianceError",
    "IntegrandError",
    "classical_weights",
    "bsq_weights",
    "bsq_weights_agnostic",
    "apply_transform",
    "bsq_integral_variance",
    "UNISOLVENCY_TOL",
    "EMV_NEGATIVE_TOL",
]

UNISOLVENCY_TOL = 1e-10
EMV_NEGATIVE_TOL = 1e-8


class TransformError(ValueError):
    """Base class for moment-transform failures."""


class UnisolvencyError(TransformError):
    """Point set is not unisolvent for the chosen basis."""


class InputCovarianceError(TransformError, np.linalg.LinAlgError):
    """Input covariance is not positive definite."""


class IntegrandError(TransformError):
    """The integrand returned a non-finite value."""


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransformWeights:
    """Precomputed weights of a sigma-point moment transform.

    Attributes
    ----------
    points : UnitSigmaPointSet
    w_mean : (N,) ndarray
    w_cov : (N, N) ndarray
    w_cross : (D, N) ndarray
    emv : (E,) or (1,) ndarray
        Expected model variance per output; a length-1 vector broadcasts.
    name : str
    """

    points: UnitSigmaPointSet
    w_mean: np.ndarray
    w_cov: np.ndarray
    w_cross: np.ndarray
    emv: np.ndarray
    name: str = ""

    def __post_init__(self):
        emv = np.atleast_1d(np.asarray(self.emv, dtype=float))
        if np.any(emv < 0):
            raise TransformError("expected model variance must be nonnegative")
        object.__setattr__(self, "w_mean", _ro(self.w_mean))
        object.__setattr__(self, "w_cov", _ro(self.w_cov))
        object.__setattr__(self, "w_cross", _ro(self.w_cross))
        object.__setattr__(self, "emv", _ro(emv))

    def emv_for(self, out_dim: int) -> np.ndarray:
        if self.emv.size == 1:
            return np.full(out_dim, self.emv[0])
        if self.emv.size != out_dim:
            raise TransformError(f"EMV has {self.emv.size} entries but the integrand has {out_dim} outputs")
        return self.emv

    def with_emv(self, emv) -> "TransformWeights":
        return TransformWeights(self.points, self.w_mean, self.w_cov, self.w_cross, emv, self.name)


@dataclass(frozen=True)
class GaussianMoments:
    """Mean, covariance and (optionally) input-output cross-covariance."""

    mean: np.ndarray
    cov: np.ndarray
    cross: np.ndarray | None = None


def classical_weights(points: UnitSigmaPointSet, name: str = "") -> TransformWeights:
    w = points.weights
    return TransformWeights(
        points=points,
        w_mean=w,
        w_cov=np.diag(w),
        w_cross=points.points * w,
        emv=np.zeros(1),
        name=name or points.rule,
    )


class _Alternant:
    """Pivoted-QR factorisation of a square alternant matrix ``V``.

    Provides ``V^{-1} B`` and ``V^{-T} B`` without forming the inverse.
    """

    def __init__(self, V, tol=UNISOLVENCY_TOL):
        n, q = V.shape
        if n != q:
            raise TransformError(f"Bayes-Sard weights need as many points as basis functions (N={n}, Q={q})")
        self.Q, self.R, self.perm = la.qr(V, pivoting=True)
        diag = np.abs(np.diag(self.R))
        if diag[-1] <= tol * diag[0]:
            raise UnisolvencyError(
                f"alternant matrix is rank deficient (|r_min|/|r_max| = {diag[-1] / diag[0]:.3g}); "
                "the point set is not unisolvent for this basis"
            )

    def solve(self, B):
        # V P = Q R  =>  V^{-1} B = P R^{-1} Q^T B
        z = la.solve_triangular(self.R, self.Q.T @ B)
        out = np.empty_like(z)
        out[self.perm] = z
        return out

    def solve_t(self, B):
        # V^{-T} B = Q R^{-T} P^T B
        return self.Q @ la.solve_triangular(self.R, B[self.perm], trans="T")


def _bsq_core(points: UnitSigmaPointSet, basis: MultiIndexBasis):
    V = alternant_matrix(basis, points)
    fac = _Alternant(V)
    w_mean = fac.solve_t(basis_mean(basis))
    # Wc = V^{-T} Lambda V^{-1}
    vinv_t_lam = fac.solve_t(basis_outer_expectation(basis))
    w_cov = fac.solve_t(vinv_t_lam.T).T
    w_cov = 0.5 * (w_cov + w_cov.T)
    # Wcc = E[xi v^T] V^{-1} = (V^{-T} E[xi v^T]^T)^T
    w_cross = fac.solve_t(cross_expectation_x_basis(basis).T).T
    return fac, w_mean, w_cov, w_cross


def _emv_from_kernel(fac, w_cov, points, basis, kernel):
    omega = kernel_poly_cross_expectation(kernel, points, basis)  # (N, Q)
    K = raw_gram(kernel, points)
    # tr(Omega V^{-1}) = tr(V^{-1} Omega)
    tr_omega = np.trace(fac.solve(omega))
    return kernel_diag_expectation(kernel) - 2.0 * tr_omega + np.sum(w_cov * K)


def _checked_emv(value):
    if value < -EMV_NEGATIVE_TOL:
        raise TransformError(
            f"expected model variance {value:.3e} is negative beyond roundoff; "
            "kernel and point set are badly conditioned"
        )
    return max(value, 0.0)


def bsq_weights(points: UnitSigmaPointSet, basis: MultiIndexBasis, kernel, name: str = "") -> TransformWeights:
    """Bayes-Sard transform weights with a kernel-derived EMV.

    Parameters
    ----------
    kernel : RbfParams or sequence of RbfParams
        One set of parameters, or one per output (giving a per-output EMV).
    """
    fac, w_mean, w_cov, w_cross = _bsq_core(points, basis)
    kernels = [kernel] if isinstance(kernel, RbfParams) else list(kernel)
    emv = [_checked_emv(_emv_from_kernel(fac, w_cov, points, basis, k)) for k in kernels]
    return TransformWeights(points, w_mean, w_cov, w_cross, np.array(emv), name=name or f"bsq-{points.rule}")


def bsq_weights_agnostic(points: UnitSigmaPointSet, basis: MultiIndexBasis, emv, name: str = "") -> TransformWeights:
    """Bayes-Sard weights with the EMV supplied directly (no kernel)."""
    emv = np.atleast_1d(np.asarray(emv, dtype=float))
    if np.any(emv < 0):
        raise TransformError("expected model variance must be nonnegative")
    _, w_mean, w_cov, w_cross = _bsq_core(points, basis)
    return TransformWeights(points, w_mean, w_cov, w_cross, emv, name=name or f"bsq-{points.rule}")


def bsq_integral_variance(points: UnitSigmaPointSet, basis: MultiIndexBasis, kernel: RbfParams) -> float:
    """Posterior variance of the integral of a scalar integrand.

    For a square unisolvent system ``(V^T K^{-1} V)^{-1} = V^{-1} K V^{-T}``,
    which reduces the variance to ``E[k(xi,xi')] - 2 z^T w + w^T K w`` with
    ``z = E[k(xi, xi_n)]`` and ``w`` the mean weights.
    """
    fac, w_mean, _, _ = _bsq_core(points, basis)
    z = kernel_mean_embedding(kernel, points)
    K = raw_gram(kernel, points)
    var = kernel_double_expectation(kernel, points.dim) - 2.0 * z @ w_mean + w_mean @ K @ w_mean
    return _checked_emv(float(var))


def _cholesky(P):
    P = 0.5 * (P + P.T)
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise InputCovarianceError(f"input covariance is not positive definite: {exc}") from None


def apply_transform(weights: TransformWeights, f, m, P, vectorized: bool = False, chol=None) -> GaussianMoments:
    """Propagate ``N(m, P)`` through ``f`` using ``weights``.

    Parameters
    ----------
    f : callable
        Maps a ``(D,)`` vector to an ``(E,)`` vector, or, if ``vectorized``,
        an ``(N, D)`` batch of points to an ``(N, E)`` batch.
    chol : ndarray, optional
        Precomputed lower Cholesky factor of ``P``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    L = _cholesky(P) if chol is None else chol
    X = m[:, None] + L @ weights.points.points  # (D, N)
    if vectorized:
        Psi = np.asarray(f(X.T), dtype=float)
        if Psi.ndim == 1:
            Psi = Psi[:, None]
    else:
        Psi = np.array([np.atleast_1d(f(x)) for x in X.T], dtype=float)
    if not np.all(np.isfinite(Psi)):
        bad = int(np.argwhere(~np.isfinite(Psi))[0, 0])
        raise IntegrandError(f"integrand is not finite at sigma-point {bad}: x = {X[:, bad]}")
    mu = Psi.T @ weights.w_mean
    S = Psi.T @ weights.w_cov @ Psi - np.outer(mu, mu)
    S[np.diag_indices_from(S)] += weights.emv_for(Psi.shape[1])
    S = 0.5 * (S + S.T)
    C = L @ (weights.w_cross @ Psi)
    return GaussianMoments(mu, S, C)
