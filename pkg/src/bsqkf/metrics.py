"""Scores for moment transforms and filters."""
from __future__ import annotations

import numpy as np

__all__ = ["skl", "rmse", "rmse_per_step", "inc", "inc_per_run", "bootstrap_spread", "IncResult"]


def _spd_solve(S, B):
    S = np.atleast_2d(S)
    try:
        L = np.linalg.cholesky(0.5 * (S + S.T))
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("covariance is not positive definite") from None
    return np.linalg.solve(L.T, np.linalg.solve(L, B))


def skl(mean_a, cov_a, mean_b, cov_b) -> float:
    """Symmetrised KL divergence between two Gaussians.

    ``0.25 * (d^T B^-1 d + d^T A^-1 d + tr(B^-1 A) + tr(A^-1 B) - 2E)``
    with ``d = mean_b - mean_a``.
    """
    ma, mb = np.atleast_1d(mean_a).astype(float), np.atleast_1d(mean_b).astype(float)
    A, B = np.atleast_2d(cov_a).astype(float), np.atleast_2d(cov_b).astype(float)
    if ma.shape != mb.shape or A.shape != B.shape or A.shape[0] != ma.size:
        raise ValueError("dimension mismatch")
    d = mb - ma
    val = 0.25 * (d @ _spd_solve(B, d) + d @ _spd_solve(A, d)
                  + np.trace(_spd_solve(B, A)) + np.trace(_spd_solve(A, B)) - 2 * ma.size)
    return float(max(val, 0.0))


def _err(truth, estimates, components):
    truth, estimates = np.asarray(truth, dtype=float), np.asarray(estimates, dtype=float)
    if truth.shape != estimates.shape:
        raise ValueError(f"length/shape mismatch: {truth.shape} vs {estimates.shape}")
    e = truth - estimates
    if e.ndim == 1:
        e = e[:, None]
    if components is not None:
        e = e[..., list(components)]
    return e


def rmse(truth, estimates, components=None) -> float:
    """``sqrt(mean_k ||x_k - m_k||^2)`` over a ``(T, D)`` sequence.

    ``components`` restricts the norm to a subset of state components.
    """
    e = _err(truth, estimates, components)
    return float(np.sqrt(np.mean(np.sum(e**2, axis=-1))))


def rmse_per_step(truth_runs, estimate_runs, components=None) -> np.ndarray:
    """RMSE across Monte Carlo runs at every time step; inputs are ``(runs, T, D)``."""
    e = _err(truth_runs, estimate_runs, components)
    return np.sqrt(np.mean(np.sum(e**2, axis=-1), axis=0))


class IncResult(float):
    """Float subclass carrying a ``regularized`` flag."""

    regularized: bool = False


def _regularize(M):
    """Add ``1e-12 * trace`` jitter to blocks that fail Cholesky; returns (M, flagged)."""
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    flat = M.reshape(-1, *M.shape[-2:]).copy()
    flagged = False
    eye = np.eye(M.shape[-1])
    for i, S in enumerate(flat):
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            flat[i] = S + 1e-12 * max(np.trace(S), np.finfo(float).tiny) * eye
            flagged = True
    return flat.reshape(M.shape), flagged


def inc_per_run(truth_runs, estimate_runs, cov_runs, components=None):
    """Inclination indication of every run, shape ``(runs,)``.

    The mean-squared-error matrix at each step is estimated from the
    ensemble of runs. Positive values mean the reported covariance is too
    small (optimistic). Returns ``(values, regularized_flag)``.
    """
    e = _err(truth_runs, estimate_runs, components)  # (runs, T, d)
    if e.ndim != 3 or e.shape[0] < 2:
        raise ValueError("INC needs an ensemble of at least 2 Monte Carlo runs")
    P = np.asarray(cov_runs, dtype=float)
    if P.ndim == 2:
        P = P[..., None, None]
    if components is not None:
        idx = list(components)
        P = P[..., idx, :][..., :, idx]
    mse = np.mean(e[..., :, None] * e[..., None, :], axis=0)  # (T, d, d)
    mse, f1 = _regularize(mse)
    P, f2 = _regularize(P)
    q_filter = np.einsum("rki,rki->rk", e, np.linalg.solve(P, e[..., None])[..., 0])
    q_mse = np.einsum("rki,rki->rk", e, np.linalg.solve(np.broadcast_to(mse, P.shape), e[..., None])[..., 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log10(q_filter / q_mse)
    # a zero error makes both quadratic forms vanish; such steps carry no information
    ratio = np.where(np.isfinite(ratio), ratio, 0.0)
    return 10.0 * np.mean(ratio, axis=1), (f1 or f2)


def inc(truth_runs, estimate_runs, cov_runs, components=None) -> IncResult:
    """Ensemble-average inclination indication; see :func:`inc_per_run`."""
    vals, flagged = inc_per_run(truth_runs, estimate_runs, cov_runs, components)
    out = IncResult(float(np.mean(vals)))
    out.regularized = flagged
    return out


def bootstrap_spread(scores, resamples: int = 10_000, seed=0) -> float:
    """Two bootstrap standard deviations of the mean of ``scores``."""
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise ValueError("no scores to bootstrap")
    if resamples < 1000:
        raise ValueError("use at least 1000 bootstrap resamples")
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    chunk = max(1, 2_000_000 // scores.size)
    for start in range(0, resamples, chunk):
        stop = min(resamples, start + chunk)
        means[start:stop] = scores[rng.integers(0, scores.size, size=(stop - start, scores.size))].mean(axis=1)
    return float(2.0 * np.std(means, ddof=1))
