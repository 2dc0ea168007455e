"""Time the numba and numpy versions of the hot kernels.

Usage: ``python benchmarks/bench_accel.py [--repeat N]``. Both versions are
imported directly, so the ``BSQKF_DISABLE_NUMBA`` flag does not matter here.
The first numba call (compilation) is excluded from the timings.
"""
import argparse
import timeit

import numpy as np

from bsqkf import _accel
from bsqkf.kernels import _cross_loops, _cross_numpy, _gram_loops, _gram_numpy
from bsqkf.models import ReentryConstants as C
from bsqkf.models import _drift_loops, _drift_numpy, _em_loops, _em_numpy
from bsqkf.polybasis import gh_max_degree_basis
from bsqkf.quadrature import gh_points


def cases():
    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(gh_points(3, 5).points)  # 125 points
    basis = gh_max_degree_basis(3, 5)
    ell = np.array([0.5, 1.0, 2.0])
    X = C.truth_mean + 1e-3 * rng.standard_normal((11, 5))
    x0 = C.truth_mean.copy()
    dw = np.ascontiguousarray(rng.standard_normal((4000, 5)) * 1e-3 * np.array([0, 0, 1, 1, 0]))
    consts = (C.R0, C.H0, C.beta0, C.Gm0)
    return {
        "gram (N=125, D=3)": (_gram_loops, _gram_numpy, (pts, ell, 4.0)),
        "kernel-poly cross (N=Q=125)": (_cross_loops, _cross_numpy, (pts, basis.indices, ell, 4.0)),
        "reentry drift (11 states)": (_drift_loops, _drift_numpy, (X, 0.1, *consts)),
        "Euler-Maruyama (4000 steps)": (_em_loops, _em_numpy, (x0, dw, 0.05, *consts, 2)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    print(f"{'kernel':32s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, (fast, ref, a) in cases().items():
        diff = float(np.max(np.abs(np.asarray(fast(*a)) - np.asarray(ref(*a)))))
        number = 20
        tf = min(timeit.repeat(lambda: fast(*a), number=number, repeat=args.repeat)) / number * 1e3
        tn = min(timeit.repeat(lambda: ref(*a), number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:32s} {tf:11.4f} {tn:11.4f} {tn / tf:8.1f} {diff:11.3g}")


if __name__ == "__main__":
    main()
