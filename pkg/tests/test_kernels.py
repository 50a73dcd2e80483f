"""Backend equivalence and determinism of the hot kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from irloss.kernels import NUMBA_AVAILABLE, numpy_backend

if NUMBA_AVAILABLE:
    from irloss.kernels import numba_backend

needs_numba = pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")


def _random_case(rng, b=5, t=4, d=3, h=6):
    x = rng.normal(size=(b, t, d))
    wx = rng.normal(size=(4 * h, d)) * 0.4
    wh = rng.normal(size=(4 * h, h)) * 0.4
    bias = rng.normal(size=4 * h) * 0.1
    dh_out = rng.normal(size=(b, t, h))
    return x, wx, wh, bias, dh_out


@needs_numba
@pytest.mark.parametrize("shape", [(1, 1, 1, 1), (5, 4, 3, 6), (8, 7, 4, 2)])
def test_backends_agree(shape):
    b, t, d, h = shape
    rng = np.random.default_rng(hash(shape) % 2**32)
    x, wx, wh, bias, dh_out = _random_case(rng, b, t, d, h)

    h_np, c_np, g_np = numpy_backend.lstm_layer_forward(x, wx, wh, bias)
    h_nb, c_nb, g_nb = numba_backend.lstm_layer_forward(x, wx, wh, bias)
    np.testing.assert_allclose(h_nb, h_np, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(c_nb, c_np, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(g_nb, g_np, rtol=1e-12, atol=1e-14)

    out_np = numpy_backend.lstm_layer_backward(x, h_np, c_np, g_np, wx, wh, dh_out)
    out_nb = numba_backend.lstm_layer_backward(x, h_nb, c_nb, g_nb, wx, wh, dh_out)
    for a, b_ in zip(out_np, out_nb):
        np.testing.assert_allclose(b_, a, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("backend_name", ["numpy", "numba"])
def test_kernels_deterministic(backend_name):
    if backend_name == "numba" and not NUMBA_AVAILABLE:
        pytest.skip("numba not installed")
    mod = numba_backend if backend_name == "numba" else numpy_backend
    rng = np.random.default_rng(3)
    x, wx, wh, bias, dh_out = _random_case(rng)
    first = mod.lstm_layer_forward(x, wx, wh, bias)
    second = mod.lstm_layer_forward(x, wx, wh, bias)
    for a, b in zip(first, second):
        assert np.array_equal(a, b)
    back1 = mod.lstm_layer_backward(x, *first, wx, wh, dh_out)
    back2 = mod.lstm_layer_backward(x, *second, wx, wh, dh_out)
    for a, b in zip(back1, back2):
        assert np.array_equal(a, b)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, IRLOSS_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", "import irloss.kernels as k; print(k.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_env_flag_rejects_unknown_backend():
    env = dict(os.environ, IRLOSS_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import irloss.kernels"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode != 0
    assert "IRLOSS_BACKEND" in out.stderr
