import os
import subprocess
import sys

import numpy as np
import pytest

from gfmnet import _kernels


@pytest.fixture
def system():
    rng = np.random.default_rng(0)
    d = 8
    A = rng.normal(size=(d, d))
    A = -(A @ A.T) / d
    return A, rng.normal(size=d), rng.normal(size=d)


def test_affine_backends_agree(system):
    A, u, x0 = system
    Phi = np.eye(len(x0)) + 0.01 * A
    a = _kernels.affine_steps(Phi, u, x0, 50, "numpy")
    b = _kernels.affine_steps(Phi, u, x0, 50, "numba")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_rk4_backends_agree(system):
    A, u, x0 = system
    a = _kernels.rk4_steps(A, u, x0, 0.01, 50, "numpy")
    b = _kernels.rk4_steps(A, u, x0, 0.01, 50, "numba")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_unbalance_backends_agree():
    rng = np.random.default_rng(1)
    th, v, P, Q = (0.05 * rng.normal(size=(40, 3)) for _ in range(4))
    for x, y in zip(_kernels.unbalance_series(th, v, P, Q, "numpy"),
                    _kernels.unbalance_series(th, v, P, Q, "numba")):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-14)


def test_unknown_backend():
    with pytest.raises(KeyError):
        _kernels.backend("fortran")


@pytest.mark.parametrize("flag, expect", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expect):
    env = dict(os.environ, GFMNET_DISABLE_JIT=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from gfmnet import _kernels; print(_kernels.active_backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expect
