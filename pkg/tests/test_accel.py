import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bsqkf import _accel
from bsqkf.kernels import _cross_loops, _cross_numpy, _gram_loops, _gram_numpy
from bsqkf.models import ReentryConstants as C
from bsqkf.models import _drift_loops, _drift_numpy, _em_loops, _em_numpy
from bsqkf.polybasis import gh_max_degree_basis
from bsqkf.quadrature import gh_points

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
CONSTS = (C.R0, C.H0, C.beta0, C.Gm0)


def test_gram_and_cross_parity():
    pts = np.ascontiguousarray(gh_points(2, 6).points)
    idx = gh_max_degree_basis(2, 6).indices
    ell = np.array([0.4, 3.0])
    assert_allclose(_gram_loops(pts, ell, 2.0), _gram_numpy(pts, ell, 2.0), rtol=1e-13, atol=1e-300)
    assert_allclose(_cross_loops(pts, idx, ell, 2.0), _cross_numpy(pts, idx, ell, 2.0), rtol=1e-12, atol=1e-300)


def test_reentry_parity():
    rng = np.random.default_rng(0)
    X = C.truth_mean + 1e-2 * rng.standard_normal((11, 5))
    assert_allclose(_drift_loops(X, 0.1, *CONSTS), _drift_numpy(X, 0.1, *CONSTS), rtol=1e-14)
    dw = np.ascontiguousarray(rng.standard_normal((400, 5)) * 1e-3)
    assert_allclose(_em_loops(C.truth_mean.copy(), dw, 0.05, *CONSTS, 2),
                    _em_numpy(C.truth_mean.copy(), dw, 0.05, *CONSTS, 2), rtol=1e-12)


def test_env_flag_selects_numpy_path():
    code = ("import bsqkf, bsqkf.kernels as k; "
            "print(bsqkf.USE_NUMBA, k._gram is k._gram_numpy)")
    env = dict(os.environ, BSQKF_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
