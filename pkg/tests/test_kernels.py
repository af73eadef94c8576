import importlib

import numpy as np
import pytest

from lanepred import kernels
from lanepred.kernels import _numpy as knp

numba_backend = pytest.importorskip("lanepred.kernels._numba",
                                    reason="numba unavailable")


def _random_mixture(rng, n=200, k=5, d=4):
    pts = rng.normal(size=(n, d))
    means = rng.normal(size=(k, d))
    chols = np.zeros((k, d, d))
    for j in range(k):
        a = rng.normal(size=(d, d))
        chols[j] = np.linalg.cholesky(a @ a.T + d * np.eye(d))
    log_w = np.log(rng.dirichlet(np.ones(k)))
    return pts, means, chols, log_w


def test_backend_constant_names_active_implementation():
    assert kernels.BACKEND in ("numpy", "numba")
    assert callable(kernels.mixture_log_joint)
    assert callable(kernels.neighbor_slots)


def test_mixture_log_joint_backends_agree(rng):
    for _ in range(5):
        pts, means, chols, log_w = _random_mixture(rng)
        a = knp.mixture_log_joint(pts, means, chols, log_w)
        b = numba_backend.mixture_log_joint(pts, means, chols, log_w)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_mixture_log_joint_single_point_closed_form():
    pts = np.zeros((1, 1))
    means = np.zeros((1, 1))
    chols = np.ones((1, 1, 1))
    log_w = np.zeros(1)
    out = knp.mixture_log_joint(pts, means, chols, log_w)
    assert out[0, 0] == pytest.approx(-0.9189385332046727)
    out_nb = numba_backend.mixture_log_joint(pts, means, chols, log_w)
    assert out_nb[0, 0] == pytest.approx(out[0, 0], abs=1e-14)


def test_neighbor_slots_backends_agree(rng):
    for _ in range(10):
        n = int(rng.integers(1, 30))
        x = np.round(rng.uniform(0, 400, n), 1)  # rounding creates ties
        vx = rng.uniform(20, 40, n)
        lane = rng.integers(1, 4, n)
        half_len = rng.uniform(2.0, 6.0, n)
        a = knp.neighbor_slots(x, vx, lane, half_len, 150.0)
        b = numba_backend.neighbor_slots(x, vx, lane, half_len, 150.0)
        for arr_a, arr_b in zip(a, b):
            assert np.array_equal(np.asarray(arr_a), np.asarray(arr_b))


def test_env_flag_selects_numpy_backend(monkeypatch):
    monkeypatch.setenv("LANEPRED_NUMBA", "0")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "numpy"
    finally:
        monkeypatch.undo()
        importlib.reload(kernels)
