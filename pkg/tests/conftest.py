"""Shared warm-up so timed acceptance checks exclude one-time JIT/LAPACK cost."""

import numpy as np
import pytest

from koopctl import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_numeric_stack():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(4, 4))
    np.linalg.eig(M)
    np.linalg.svd(M)
    np.linalg.lstsq(M, M, rcond=None)
    np.linalg.eigvalsh(M + M.T)
    kernels.henon_orbit(0.1, 0.1, 1.4, 0.3, 10)
    kernels.vdp_orbit(0.1, 0.1, 1.0, 0.01, 10)
    exps = np.array([[1, 0], [0, 1]], dtype=np.int64)
    kernels.vdp_closed_loop(0.1, 0.1, 1.0, 0.01, 5, exps, np.zeros(2), -np.inf, np.inf)
    kernels.henon_closed_loop(0.1, 0.1, 1.4, 0.3, 5, exps, np.zeros(2), -np.inf, np.inf)
    kernels.lift_batch(np.zeros((2, 2)), exps)
    kernels.histogram2d_loop(np.zeros((3, 2)), -1.0, 1.0, -1.0, 1.0, 4, 4)
    yield
