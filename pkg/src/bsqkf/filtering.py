"""Gaussian sigma-point filter driven by two moment transforms.

With classical weights this is the UKF/CKF/GHKF; with Bayes-Sard weights
it is the Bayes-Sard quadrature Kalman filter (BSQKF). Noise is additive:
``Q`` and ``R`` are added after the respective transforms.

Time indexing: the prior at step ``k`` is obtained with ``f(x, k)``, and the
measurement ``y_k`` is processed with ``h(x, k)``; ``k = 0`` is the initial
condition and the first measurement is ``y_1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .transforms import GaussianMoments, TransformError, TransformWeights, apply_transform

__all__ = [
    "StateSpaceModel",
    "FilterState",
    "FilterResult",
    "FilterError",
    "InnovationCovarianceError",
    "predict",
    "update",
    "run_filter",
    "wrap_angle",
]


class FilterError(RuntimeError):
    """A filter step failed; ``step`` carries the time index."""

    def __init__(self, msg, step=None):
        super().__init__(msg if step is None else f"step {step}: {msg}")
        self.step = step


class InnovationCovarianceError(FilterError):
    pass


def wrap_angle(a):
    """Wrap angles to ``[-pi, pi)``."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class StateSpaceModel:
    """Additive-noise discrete-time model.

    ``x_k = f(x_{k-1}, k) + q_{k-1}``, ``y_k = h(x_k, k) + r_k``.

    If ``vectorized`` is set, ``f`` and ``h`` take an ``(N, D)`` batch of
    states and return ``(N, D)`` / ``(N, E)`` batches.
    ``angular_measurements`` lists measurement components whose innovations
    are wrapped to ``[-pi, pi)``.
    """

    f: Callable
    h: Callable
    Q: np.ndarray
    R: np.ndarray
    init: GaussianMoments
    vectorized: bool = False
    angular_measurements: tuple = ()
    name: str = ""

    @property
    def state_dim(self) -> int:
        return np.atleast_2d(self.Q).shape[0]

    @property
    def meas_dim(self) -> int:
        return np.atleast_2d(self.R).shape[0]


@dataclass(frozen=True)
class FilterState:
    k: int
    posterior: GaussianMoments


@dataclass
class FilterResult:
    """Per-step output of :func:`run_filter`, stacked along the first axis."""

    means: np.ndarray  # (T, D) posterior means, k = 1..T
    covs: np.ndarray  # (T, D, D)
    prior_means: np.ndarray
    prior_covs: np.ndarray
    innovations: np.ndarray  # (T, E)
    innovation_covs: np.ndarray  # (T, E, E)
    extra: dict = field(default_factory=dict)


def _chol_with_retry(P, step=None):
    P = 0.5 * (P + P.T)
    try:
        return P, np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    P = P + 1e-10 * max(np.trace(P), np.finfo(float).tiny) * np.eye(P.shape[0])
    try:
        return P, np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise FilterError("covariance is not positive definite after jitter", step) from None


def _bind_time(fn, k):
    return lambda x: fn(x, k)


def predict(model: StateSpaceModel, transform_f: TransformWeights, state: FilterState) -> GaussianMoments:
    """Time update from ``k-1`` to ``k = state.k + 1`` (adds ``Q``)."""
    k = state.k + 1
    P, L = _chol_with_retry(state.posterior.cov, k)
    mom = apply_transform(transform_f, _bind_time(model.f, k), state.posterior.mean, P,
                          vectorized=model.vectorized, chol=L)
    cov = mom.cov + model.Q
    return GaussianMoments(mom.mean, 0.5 * (cov + cov.T))


def _innovation(model, y, mu):
    nu = np.asarray(y, dtype=float) - mu
    if model.angular_measurements:
        idx = list(model.angular_measurements)
        nu[idx] = wrap_angle(nu[idx])
    return nu


def update(model: StateSpaceModel, transform_h: TransformWeights, prior: GaussianMoments, y, k: int,
           _diag=None) -> GaussianMoments:
    """Measurement update with ``y_k``.

    The gain ``K = C S^{-1}`` is obtained by a Cholesky solve and the
    covariance is ``P - K S K^T``, symmetrised.
    """
    P, L = _chol_with_retry(prior.cov, k)
    mom = apply_transform(transform_h, _bind_time(model.h, k), prior.mean, P,
                          vectorized=model.vectorized, chol=L)
    S = mom.cov + model.R
    S = 0.5 * (S + S.T)
    try:
        Ls = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise InnovationCovarianceError("innovation covariance is not positive definite", k) from None
    # K = C S^{-1}  <=>  S K^T = C^T
    Kt = np.linalg.solve(Ls.T, np.linalg.solve(Ls, mom.cross.T))
    K = Kt.T
    nu = _innovation(model, y, mom.mean)
    mean = prior.mean + K @ nu
    cov = P - K @ S @ Kt
    if _diag is not None:
        _diag["innovation"] = nu
        _diag["innovation_cov"] = S
    return GaussianMoments(mean, 0.5 * (cov + cov.T))


def run_filter(model: StateSpaceModel, transform_f: TransformWeights, transform_h: TransformWeights,
               measurements: Sequence) -> FilterResult:
    """Filter a measurement sequence ``y_1..y_T`` starting from ``model.init``."""
    ys = np.asarray(measurements, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    T = ys.shape[0]
    if T == 0:
        raise ValueError("need at least one measurement")
    D, E = model.state_dim, model.meas_dim
    out = FilterResult(
        means=np.empty((T, D)), covs=np.empty((T, D, D)),
        prior_means=np.empty((T, D)), prior_covs=np.empty((T, D, D)),
        innovations=np.empty((T, E)), innovation_covs=np.empty((T, E, E)),
    )
    state = FilterState(0, GaussianMoments(np.atleast_1d(model.init.mean).astype(float),
                                           np.atleast_2d(model.init.cov).astype(float)))
    diag = {}
    for i in range(T):
        k = i + 1
        try:
            prior = predict(model, transform_f, state)
            post = update(model, transform_h, prior, ys[i], k, _diag=diag)
        except FilterError:
            raise
        except (TransformError, np.linalg.LinAlgError) as exc:
            raise FilterError(str(exc), k) from exc
        out.prior_means[i], out.prior_covs[i] = prior.mean, prior.cov
        out.means[i], out.covs[i] = post.mean, post.cov
        out.innovations[i], out.innovation_covs[i] = diag["innovation"], diag["innovation_cov"]
        state = FilterState(k, post)
    return out
