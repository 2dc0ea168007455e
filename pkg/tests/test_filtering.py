import numpy as np
import pytest
from numpy.testing import assert_allclose

from bsqkf.filtering import FilterError, FilterState, StateSpaceModel, predict, run_filter, update, wrap_angle
from bsqkf.kernels import RbfParams
from bsqkf.models import simulate_trajectory, ungm_model
from bsqkf.polybasis import ut_basis
from bsqkf.quadrature import gh_points, ut_points
from bsqkf.transforms import GaussianMoments, bsq_weights, bsq_weights_agnostic, classical_weights

from conftest import kalman_filter

UT3 = classical_weights(ut_points(3, 0.0))


def test_wrap_angle():
    assert_allclose(wrap_angle([np.pi, -np.pi, 3 * np.pi / 2, 0.1]), [-np.pi, -np.pi, -np.pi / 2, 0.1])


def test_predict_linear(linear_model):
    model, A, _ = linear_model
    st = FilterState(0, model.init)
    prior = predict(model, UT3, st)
    assert_allclose(prior.mean, A @ model.init.mean, atol=1e-12)
    assert_allclose(prior.cov, A @ model.init.cov @ A.T + model.Q, atol=1e-12)


def test_predict_identity_adds_noise_and_emv():
    Q = np.diag([0.1, 0.2])
    model = StateSpaceModel(lambda x, k: x, lambda x, k: x, Q, np.eye(2), GaussianMoments(np.zeros(2), np.eye(2)))
    P = np.array([[1.0, 0.3], [0.3, 2.0]])
    st = FilterState(0, GaussianMoments(np.ones(2), P))
    assert_allclose(predict(model, classical_weights(ut_points(2, 1.0)), st).cov, P + Q, atol=1e-12)
    tw = bsq_weights_agnostic(ut_points(2, 1.0), ut_basis(2), 0.05)
    assert_allclose(predict(model, tw, st).cov, P + Q + 0.05 * np.eye(2), atol=1e-12)


def test_predict_ungm_uses_step_index():
    model = ungm_model()
    tw = classical_weights(gh_points(1, 5))
    st = FilterState(6, GaussianMoments(np.array([1.5]), np.array([[2.0]])))
    prior = predict(model, tw, st)
    # direct sigma-point evaluation at k = 7
    x = 1.5 + np.sqrt(2.0) * tw.points.points[0]
    fx = 0.5 * x + 25 * x / (1 + x**2) + 8 * np.cos(1.2 * 7)
    mu = tw.w_mean @ fx
    assert prior.mean[0] == pytest.approx(mu, abs=1e-12)
    assert prior.cov[0, 0] == pytest.approx(tw.w_mean @ (fx - mu) ** 2 + 10.0, abs=1e-10)


def test_update_linear(linear_model):
    model, _, H = linear_model
    prior = GaussianMoments(np.array([0.2, -0.4, 1.0]), np.diag([1.0, 2.0, 0.5]))
    y = np.array([0.3, -0.7])
    post = update(model, UT3, prior, y, 1)
    S = H @ prior.cov @ H.T + model.R
    K = prior.cov @ H.T @ np.linalg.inv(S)
    assert_allclose(post.mean, prior.mean + K @ (y - H @ prior.mean), atol=1e-10)
    assert_allclose(post.cov, prior.cov - K @ S @ K.T, atol=1e-10)
    # zero innovation leaves the mean unchanged
    assert_allclose(update(model, UT3, prior, H @ prior.mean, 1).mean, prior.mean, atol=1e-12)


def test_update_uninformative(linear_model):
    model, _, _ = linear_model
    from dataclasses import replace
    vague = replace(model, R=1e12 * np.eye(2))
    prior = GaussianMoments(np.ones(3), np.eye(3))
    post = update(vague, UT3, prior, np.array([5.0, -5.0]), 1)
    assert_allclose(post.mean, prior.mean, rtol=1e-6)
    assert_allclose(post.cov, prior.cov, rtol=1e-6, atol=1e-6 * np.linalg.norm(prior.cov))


def test_run_filter_equals_kalman(linear_model):
    model, A, H = linear_model
    rng = np.random.default_rng(4)
    ys = rng.standard_normal((100, 2))
    res = run_filter(model, UT3, UT3, ys)
    m, P = kalman_filter(A, H, model.Q, model.R, model.init.mean, model.init.cov, ys)
    assert np.max(np.abs(res.means - m)) < 1e-10
    assert np.max(np.abs(res.covs - P)) < 1e-10
    assert res.innovations.shape == (100, 2) and res.innovation_covs.shape == (100, 2, 2)


def test_bsq_zero_emv_reproduces_ukf_on_ungm():
    model = ungm_model()
    _, y = simulate_trajectory(model, 500, seed=3)
    ukf = classical_weights(ut_points(1, 2.0))
    bsq = bsq_weights_agnostic(ut_points(1, 2.0), ut_basis(1), 0.0)
    a, b = run_filter(model, ukf, ukf, y), run_filter(model, bsq, bsq, y)
    assert np.max(np.abs(a.means - b.means)) < 1e-9
    assert np.max(np.abs(a.covs - b.covs)) < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_ungm_posteriors_finite_and_psd(seed):
    model = ungm_model()
    _, y = simulate_trajectory(model, 500, seed=seed)
    tw = bsq_weights(ut_points(1, 2.0), ut_basis(1), RbfParams(3.0, (0.3,)))
    res = run_filter(model, tw, tw, y)
    assert np.all(np.isfinite(res.means))
    assert np.all(res.covs[:, 0, 0] > 0)


def test_angular_innovation_wrapped():
    model = StateSpaceModel(lambda x, k: x, lambda x, k: x, 1e-4 * np.eye(1), np.array([[0.01]]),
                            GaussianMoments(np.array([np.pi - 0.05]), np.array([[0.01]])),
                            angular_measurements=(0,))
    tw = classical_weights(ut_points(1, 2.0))
    res = run_filter(model, tw, tw, np.array([[-np.pi + 0.05]]))
    # the measurement is 0.1 rad away across the branch cut, not 2*pi - 0.1
    assert abs(res.innovations[0, 0] - 0.1) < 1e-9
    assert res.means[0, 0] > np.pi - 0.05


def test_failure_reports_step():
    def h(x, k):
        return x if k < 4 else x * np.nan

    model = StateSpaceModel(lambda x, k: x, h, np.eye(1), np.eye(1), GaussianMoments(np.zeros(1), np.eye(1)))
    tw = classical_weights(ut_points(1, 2.0))
    with pytest.raises(FilterError, match="step 4") as exc:
        run_filter(model, tw, tw, np.zeros((10, 1)))
    assert exc.value.step == 4


def test_empty_measurements():
    with pytest.raises(ValueError):
        run_filter(ungm_model(), UT3, UT3, np.zeros((0, 1)))
