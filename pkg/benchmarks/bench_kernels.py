"""Benchmark of the two kernel backends.

Compares the compiled (numba) and the pure-numpy implementations of the
hot kernels — mixture log-joint evaluation and neighbor-slot assignment —
on realistic problem sizes, and verifies that both agree numerically.

Run:  python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from lanepred.kernels import _numpy as knp

try:
    from lanepred.kernels import _numba as knb
    HAVE_NUMBA = True
except ImportError:
    knb = None
    HAVE_NUMBA = False


def _time(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_mixture_log_joint(rng):
    n, k, d = 20000, 32, 4
    points = rng.normal(size=(n, d))
    means = rng.normal(size=(k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        a = rng.normal(size=(d, d))
        covs[j] = a @ a.T + d * np.eye(d)
    chols = np.linalg.cholesky(covs)
    log_w = np.log(np.full(k, 1.0 / k))
    args = (points, means, chols, log_w)

    ref = knp.mixture_log_joint(*args)
    t_np = _time(knp.mixture_log_joint, *args)
    print(f"mixture_log_joint  n={n} K={k} d={d}")
    print(f"  numpy : {t_np * 1e3:8.2f} ms")
    if HAVE_NUMBA:
        out = knb.mixture_log_joint(*args)  # first call compiles
        assert np.allclose(out, ref, atol=1e-9), "backend mismatch"
        t_nb = _time(knb.mixture_log_joint, *args)
        print(f"  numba : {t_nb * 1e3:8.2f} ms   (speedup {t_np / t_nb:.1f}x)")


def bench_neighbor_slots(rng):
    n = 400
    x = rng.uniform(0, 1000, n)
    vx = rng.uniform(25, 40, n)
    lane = rng.integers(1, 4, n)
    half_len = np.full(n, 2.25)
    args = (x, vx, lane, half_len, 150.0)

    ref = knp.neighbor_slots(*args)
    t_np = _time(knp.neighbor_slots, *args)
    print(f"neighbor_slots  n={n}")
    print(f"  numpy : {t_np * 1e3:8.2f} ms")
    if HAVE_NUMBA:
        out = knb.neighbor_slots(*args)
        for a, b in zip(out, ref):
            assert np.allclose(a, b), "backend mismatch"
        t_nb = _time(knb.neighbor_slots, *args)
        print(f"  numba : {t_nb * 1e3:8.2f} ms   (speedup {t_np / t_nb:.1f}x)")


def main():
    if not HAVE_NUMBA:
        print("numba backend unavailable; benchmarking numpy only")
    rng = np.random.default_rng(0)
    bench_mixture_log_joint(rng)
    bench_neighbor_slots(rng)


if __name__ == "__main__":
    main()
