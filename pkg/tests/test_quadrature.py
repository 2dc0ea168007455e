import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bsqkf.polybasis import gaussian_moment
from bsqkf.quadrature import (
    PointSetSizeError,
    gh_points,
    gh_points_1d,
    hermite_e,
    spherical_radial_points,
    ut_points,
)


def test_ut_1d_kappa2():
    s = ut_points(1, 2.0)
    assert_allclose(s.points[0], [0.0, np.sqrt(3), -np.sqrt(3)], atol=1e-15)
    assert_allclose(s.weights, [2 / 3, 1 / 6, 1 / 6], atol=1e-15)


def test_ut_2d_kappa0_zero_centre_weight():
    s = ut_points(2, 0.0)
    assert s.weights[0] == 0.0
    assert_allclose(s.weights[1:], 0.25)
    assert_allclose(s.points[:, 1:3], np.sqrt(2) * np.eye(2))
    assert_allclose(s.points[:, 3:5], -np.sqrt(2) * np.eye(2))


def test_ut_rejects_nonpositive_c():
    with pytest.raises(ValueError):
        ut_points(2, -2.0)
    with pytest.raises(ValueError):
        ut_points(0, 1.0)


def test_point_sets_are_read_only():
    s = ut_points(2, 1.0)
    with pytest.raises(ValueError):
        s.points[0, 0] = 1.0


@pytest.mark.parametrize("dim", [1, 2, 4])
def test_spherical_radial(dim):
    s = spherical_radial_points(dim)
    assert s.num_points == 2 * dim
    assert_allclose(s.weights, 1 / (2 * dim))
    assert np.all(np.linalg.norm(s.points, axis=0) > 0)
    assert_allclose(np.linalg.norm(s.points, axis=0), np.sqrt(dim))


@pytest.mark.parametrize(
    "p, roots, weights",
    [
        (1, [0.0], [1.0]),
        (2, [-1.0, 1.0], [0.5, 0.5]),
        (3, [-np.sqrt(3), 0.0, np.sqrt(3)], [1 / 6, 2 / 3, 1 / 6]),
    ],
)
def test_gh_1d_small(p, roots, weights):
    r, w = gh_points_1d(p)
    assert_allclose(r, roots, atol=1e-14)
    assert_allclose(w, weights, atol=1e-14)


@pytest.mark.parametrize("p", range(2, 10))
def test_hermite_roots_residual(p):
    r, _ = gh_points_1d(p)
    He, _ = hermite_e(p, r)
    assert np.max(np.abs(He)) < 1e-10


@pytest.mark.parametrize("p", [5, 10, 12, 20, 40, 80])
def test_hermite_roots_within_one_ulp(p):
    # |He_p| at the outer roots grows like He_p' * eps, so for large p the
    # meaningful check is that a further Newton step moves a root by < 1 ulp
    r, _ = gh_points_1d(p)
    He, He_prev = hermite_e(p, r)
    step = np.abs(He / (p * He_prev))
    assert np.all(step <= np.finfo(float).eps * np.maximum(np.abs(r), 1.0))


@pytest.mark.parametrize("p", [5, 10, 20])
def test_gh_1d_against_numpy(p):
    # numpy's hermite_e module is an independent implementation
    r_ref, w_ref = np.polynomial.hermite_e.hermegauss(p)
    r, w = gh_points_1d(p)
    assert_allclose(r, r_ref, atol=1e-12)
    assert_allclose(w, w_ref / np.sqrt(2 * np.pi), atol=1e-13)


def test_gh_tensor_examples():
    s = gh_points(2, 3)
    assert s.num_points == 9
    centre = np.flatnonzero(np.all(s.points == 0, axis=0))
    assert_allclose(s.weights[centre], 4 / 9)
    s2 = gh_points(2, 2)
    assert_allclose(np.abs(s2.points), 1.0)
    assert_allclose(s2.weights, 0.25)
    # first axis varies slowest
    assert_array_equal(s2.points, [[-1, -1, 1, 1], [-1, 1, -1, 1]])
    r, w = gh_points_1d(7)
    s7 = gh_points(1, 7)
    assert_allclose(s7.points[0], r)
    assert_allclose(s7.weights, w)


def test_gh_size_cap():
    with pytest.raises(PointSetSizeError):
        gh_points(6, 10)
    with pytest.raises(PointSetSizeError):
        gh_points(2, 5, max_points=10)


ALL_SETS = [ut_points(d, k) for d in (1, 2, 3, 5) for k in (0.0, 1.0, 2.0)] + [
    spherical_radial_points(d) for d in (1, 3)] + [gh_points(d, p) for d in (1, 2) for p in (2, 3, 5)]


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: f"{s.rule}-{s.dim}-{s.num_points}")
def test_normalization_and_zero_mean(s):
    assert abs(s.weights.sum() - 1) < 1e-12
    assert np.max(np.abs(s.points @ s.weights)) < 1e-12
    assert len({tuple(c) for c in s.points.T}) == s.num_points


@pytest.mark.parametrize("s", [x for x in ALL_SETS if x.rule != "gh"], ids=lambda s: f"{s.rule}-{s.dim}")
def test_point_symmetry(s):
    cols = {tuple(np.round(c, 12)): w for c, w in zip(s.points.T, s.weights)}
    for c, w in cols.items():
        if any(c):
            assert cols[tuple(-np.array(c) + 0.0)] == pytest.approx(w)


@pytest.mark.parametrize("D, p", [(d, p) for d in (1, 2) for p in range(1, 6)])
def test_gh_exactness_sweep(D, p):
    s = gh_points(D, p)
    for alpha in itertools.product(range(2 * p), repeat=D):
        quad = s.weights @ np.prod(s.points.T ** np.array(alpha), axis=1)
        assert abs(quad - np.prod(gaussian_moment(np.array(alpha)))) < 1e-9, alpha


@pytest.mark.parametrize("D, kappa", [(1, 2.0), (2, 1.0), (3, 0.0), (5, 2.0)])
def test_ut_degree3_exactness(D, kappa):
    s = ut_points(D, kappa)
    for alpha in itertools.product(range(4), repeat=D):
        if sum(alpha) > 3:
            continue
        quad = s.weights @ np.prod(s.points.T ** np.array(alpha), axis=1)
        assert abs(quad - np.prod(gaussian_moment(np.array(alpha)))) < 1e-12


def test_gh_weights_log_space_large_order():
    # factorials overflow doubles past p ~ 170; weights must stay finite
    r, w = gh_points_1d(200)
    assert np.all(np.isfinite(w)) and np.all(w > 0)
    assert abs(w.sum() - 1) < 1e-10
    assert math.isclose(float(w @ r**2), 1.0, rel_tol=1e-8)
