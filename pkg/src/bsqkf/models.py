"""Benchmark problems and ground-truth simulation.

* polar-to-Cartesian conversion (static moment-transform study)
* univariate non-stationary growth model (UNGM)
* radar tracking of a reentry vehicle

Reentry units: km, km/s, rad.
"""
from __future__ import annotations

import csv
import io
from functools import partial

import numpy as np

from ._accel import njit, select
from .filtering import StateSpaceModel
from .transforms import GaussianMoments

__all__ = [
    "polar_to_cartesian",
    "polar_spiral_means",
    "polar_input_covariances",
    "ungm_model",
    "simulate_trajectory",
    "ReentryConstants",
    "reentry_drift",
    "reentry_measure",
    "reentry_truth_simulate",
    "reentry_filter_model",
    "reentry_measurement_noise",
    "SimulationError",
    "trajectory_to_csv",
    "trajectory_from_csv",
]


class SimulationError(RuntimeError):
    pass


def _noise_factor(C):
    """A matrix ``G`` with ``G G^T = C`` for symmetric PSD ``C`` (may be singular)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if np.count_nonzero(C - np.diag(np.diag(C))) == 0:
        return np.diag(np.sqrt(np.clip(np.diag(C), 0.0, None)))
    vals, vecs = np.linalg.eigh(0.5 * (C + C.T))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


# --- polar to Cartesian ----------------------------------------------------


def polar_to_cartesian(x):
    """``(r, theta) -> (r cos theta, r sin theta)``; works on ``(..., 2)`` arrays."""
    x = np.asarray(x, dtype=float)
    r, th = x[..., 0], x[..., 1]
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def polar_spiral_means(n: int = 10) -> np.ndarray:
    """``n`` input means on an Archimedean spiral: radius 1..10 m over one turn."""
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    r = np.linspace(1.0, 10.0, n)
    return np.column_stack([r, theta])


def polar_input_covariances(n: int = 10, sigma_r: float = 0.5, deg_range=(6.0, 36.0)) -> np.ndarray:
    """Diagonal input covariances with azimuth deviation spanning ``deg_range`` degrees."""
    s_th = np.deg2rad(np.linspace(deg_range[0], deg_range[1], n))
    return np.array([np.diag([sigma_r**2, s**2]) for s in s_th])


# --- UNGM ------------------------------------------------------------------


def _ungm_f(x, k):
    return 0.5 * x + 25.0 * x / (1.0 + x**2) + 8.0 * np.cos(1.2 * k)


def _ungm_h(x, k):
    return x**2 / 20.0


def ungm_model(q_var: float = 10.0, r_var: float = 1.0, init_var: float = 5.0) -> StateSpaceModel:
    """UNGM with ``f(x,k) = x/2 + 25x/(1+x^2) + 8cos(1.2k)`` and ``h(x) = x^2/20``."""
    return StateSpaceModel(
        f=_ungm_f,
        h=_ungm_h,
        Q=np.array([[q_var]]),
        R=np.array([[r_var]]),
        init=GaussianMoments(np.zeros(1), np.array([[init_var]])),
        vectorized=True,
        name="ungm",
    )


def simulate_trajectory(model: StateSpaceModel, T: int, seed=0, init_state=None):
    """Simulate ``x_1..x_T`` and ``y_1..y_T`` from an additive-noise model.

    The initial state is drawn from ``model.init`` unless given. Returns
    ``(states, measurements)`` of shapes ``(T, D)`` and ``(T, E)``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    D, E = model.state_dim, model.meas_dim
    Gq, Gr = _noise_factor(model.Q), _noise_factor(model.R)
    if init_state is None:
        x = np.atleast_1d(model.init.mean).astype(float) + _noise_factor(model.init.cov) @ rng.standard_normal(D)
    else:
        x = np.atleast_1d(np.asarray(init_state, dtype=float)).copy()
    qn = rng.standard_normal((T, D)) @ Gq.T
    rn = rng.standard_normal((T, E)) @ Gr.T

    def call(fn, x, k):
        if model.vectorized:
            return np.asarray(fn(x[None, :], k), dtype=float)[0]
        return np.atleast_1d(np.asarray(fn(x, k), dtype=float))

    states, meas = np.empty((T, D)), np.empty((T, E))
    for i in range(T):
        k = i + 1
        x = call(model.f, x, k) + qn[i]
        states[i] = x
        meas[i] = call(model.h, x, k) + rn[i]
    return states, meas


# --- reentry vehicle -------------------------------------------------------


class ReentryConstants:
    R0 = 6374.0
    H0 = 13.406
    beta0 = -0.59783
    Gm0 = 3.9860e5
    truth_mean = np.array([6500.0, 350.0, -1.8, -6.8, 0.7])
    truth_var_p = 1e-6
    truth_var_v = 1e-6
    truth_q_v = 2.4e-5
    truth_q_theta = 0.0
    truth_dt = 0.05
    duration = 200.0
    filter_dt = 0.1
    filter_q_theta = 1e-6
    filter_mean = np.array([6500.0, 350.0, -1.1, -6.1, 0.7])
    meas_var = np.array([1e-6, 0.17e-6])


@njit
def _drift_loops(X, dt, R0, H0, beta0, Gm0):
    n = X.shape[0]
    out = np.empty_like(X)
    for i in range(n):
        px, py, vx, vy, th = X[i, 0], X[i, 1], X[i, 2], X[i, 3], X[i, 4]
        r = np.sqrt(px * px + py * py)
        v = np.sqrt(vx * vx + vy * vy)
        drag = beta0 * np.exp(th) * np.exp((R0 - r) / H0) * v
        grav = -Gm0 / (r * r * r)
        out[i, 0] = px + vx * dt
        out[i, 1] = py + vy * dt
        out[i, 2] = vx + (drag * vx + grav * px) * dt
        out[i, 3] = vy + (drag * vy + grav * py) * dt
        out[i, 4] = th
    return out


def _drift_numpy(X, dt, R0, H0, beta0, Gm0):
    px, py, vx, vy, th = X.T
    r = np.sqrt(px**2 + py**2)
    v = np.sqrt(vx**2 + vy**2)
    drag = beta0 * np.exp(th) * np.exp((R0 - r) / H0) * v
    grav = -Gm0 / r**3
    return np.column_stack([
        px + vx * dt,
        py + vy * dt,
        vx + (drag * vx + grav * px) * dt,
        vy + (drag * vy + grav * py) * dt,
        th,
    ])


_drift = select(_drift_loops, _drift_numpy)


def reentry_drift(X, dt: float):
    """One deterministic Euler step of the reentry dynamics for a batch ``(N, 5)``.

    Drag ``D = beta0 exp(theta) exp((R0 - R)/H0) V`` and gravity
    ``G = -Gm0 / R^3`` (attractive, so the acceleration is ``G p``).
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    c = ReentryConstants
    return _drift(X, float(dt), c.R0, c.H0, c.beta0, c.Gm0)


@njit
def _em_loops(x0, dw, dt, R0, H0, beta0, Gm0, stride):
    nsteps = dw.shape[0]
    nout = nsteps // stride
    out = np.empty((nout, 5))
    x = x0.copy()
    buf = np.empty((1, 5))
    j = 0
    for i in range(nsteps):
        buf[0, :] = x
        y = _drift_loops(buf, dt, R0, H0, beta0, Gm0)
        for d in range(5):
            x[d] = y[0, d] + dw[i, d]
        if not (x[0] * x[0] + x[1] * x[1] > 0.0) or not np.isfinite(x[0] + x[1] + x[2] + x[3] + x[4]):
            out[:, :] = np.nan
            return out
        if (i + 1) % stride == 0:
            out[j, :] = x
            j += 1
    return out


def _em_numpy(x0, dw, dt, R0, H0, beta0, Gm0, stride):
    nsteps = dw.shape[0]
    out = np.empty((nsteps // stride, 5))
    x = x0.copy()[None, :]
    for i in range(nsteps):
        x = _drift_numpy(x, dt, R0, H0, beta0, Gm0) + dw[i]
        if not (x[0, 0] ** 2 + x[0, 1] ** 2 > 0.0) or not np.all(np.isfinite(x)):
            out[:] = np.nan
            return out
        if (i + 1) % stride == 0:
            out[(i + 1) // stride - 1] = x[0]
    return out


_em = select(_em_loops, _em_numpy)


def reentry_measure(X, radar=(0.0, 0.0)):
    """Range and bearing of a batch ``(N, 5)`` seen from ``radar`` -> ``(N, 2)``.

    The default places the radar at the origin of the coordinate frame.
    """
    X = np.atleast_2d(X)
    dx, dy = X[:, 0] - radar[0], X[:, 1] - radar[1]
    return np.column_stack([np.hypot(dx, dy), np.arctan2(dy, dx)])


def reentry_measurement_noise(T: int, seed) -> np.ndarray:
    """Measurement noise samples for a trajectory, from their own RNG stream."""
    rng = np.random.default_rng([int(seed), 1])
    return rng.standard_normal((T, 2)) * np.sqrt(ReentryConstants.meas_var)


def reentry_truth_simulate(seed, duration: float | None = None, radar=(0.0, 0.0)):
    """Simulate one reentry trajectory and its radar measurements.

    Euler-Maruyama at 0.05 s, subsampled to the 0.1 s filter rate. The
    trajectory depends only on ``seed``; ``radar`` only moves the sensor.

    Returns
    -------
    states : (T, 5) ndarray
        True states at t = 0.1 k, k = 1..T.
    measurements : (T, 2) ndarray
        Range [km] and bearing [rad].
    """
    c = ReentryConstants
    duration = c.duration if duration is None else duration
    rng = np.random.default_rng([int(seed), 0])
    init_sd = np.sqrt(np.array([c.truth_var_p, c.truth_var_p, c.truth_var_v, c.truth_var_v, 0.0]))
    x0 = c.truth_mean + init_sd * rng.standard_normal(5)
    stride = int(round(c.filter_dt / c.truth_dt))
    nsteps = int(round(duration / c.truth_dt))
    q_sd = np.sqrt(np.array([0.0, 0.0, c.truth_q_v, c.truth_q_v, c.truth_q_theta]) * c.truth_dt)
    dw = rng.standard_normal((nsteps, 5)) * q_sd
    states = _em(x0, np.ascontiguousarray(dw), c.truth_dt, c.R0, c.H0, c.beta0, c.Gm0, stride)
    if not np.all(np.isfinite(states)):
        raise SimulationError(f"reentry trajectory for seed {seed} left the physical domain")
    meas = reentry_measure(states, radar) + reentry_measurement_noise(states.shape[0], seed)
    return states, meas


def _reentry_f(X, k):
    return reentry_drift(X, ReentryConstants.filter_dt)


def _reentry_h(X, k, radar=(0.0, 0.0)):
    return reentry_measure(X, radar)


def reentry_filter_model(radar=(0.0, 0.0)) -> StateSpaceModel:
    """Discrete-time filter model at 0.1 s with the misspecified initial condition."""
    c = ReentryConstants
    dt = c.filter_dt
    Q = dt * np.diag([0.0, 0.0, c.truth_q_v, c.truth_q_v, c.filter_q_theta])
    P0 = np.diag([c.truth_var_p, c.truth_var_p, c.truth_var_v, c.truth_var_v, 1.0])
    return StateSpaceModel(
        f=_reentry_f,
        h=partial(_reentry_h, radar=tuple(float(v) for v in radar)),
        Q=Q,
        R=np.diag(c.meas_var),
        init=GaussianMoments(c.filter_mean.copy(), P0),
        vectorized=True,
        angular_measurements=(1,),
        name="reentry",
    )


# --- CSV serialisation -----------------------------------------------------


def trajectory_to_csv(states, measurements) -> str:
    """One row per step: ``k, x_1..x_D, y_1..y_E`` (floats in repr form)."""
    states, measurements = np.atleast_2d(states), np.atleast_2d(measurements)
    if states.shape[0] != measurements.shape[0]:
        raise ValueError("states and measurements must have the same length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"x{i}" for i in range(states.shape[1])] + [f"y{i}" for i in range(measurements.shape[1])])
    for k, (x, y) in enumerate(zip(states, measurements), start=1):
        w.writerow([k] + [repr(float(v)) for v in x] + [repr(float(v)) for v in y])
    return buf.getvalue()


def trajectory_from_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    nx = sum(1 for h in header if h.startswith("x"))
    data = np.array([[float(v) for v in r[1:]] for r in body])
    return data[:, :nx], data[:, nx:]
