"""Pure-numpy reference implementations of the hot kernels.

These are the fallback path when numba is unavailable or disabled via
``LANEPRED_NUMBA=0``; the numba versions in ``_numba.py`` must agree with
them to floating-point tolerance (checked in tests and benchmarked in
``benchmarks/bench_kernels.py``).
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

LOG_2PI = float(np.log(2.0 * np.pi))


def mixture_log_joint(points, means, chols, log_weights):
    """Per-point, per-component log joint density of a Gaussian mixture.

    points: (N, D); means: (K, D); chols: (K, D, D) lower Cholesky factors
    of the component covariances; log_weights: (K,).
    Returns (N, K) with entries log w_k + log N(x_n; mu_k, Sigma_k).
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        diff = points - means[j]
        # solve L z = diff^T  ->  mahalanobis = |z|^2
        zz = sla.solve_triangular(chols[j], diff.T, lower=True, check_finite=False)
        maha = np.einsum("dn,dn->n", zz, zz)
        log_det = 2.0 * np.sum(np.log(np.diag(chols[j])))
        out[:, j] = log_weights[j] - 0.5 * (d * LOG_2PI + log_det + maha)
    return out


def neighbor_slots(x, vx, lane, half_len, max_range):
    """Fill the 8 neighbor slots for every vehicle of one frame snapshot.

    Slot order: LP, LA, LF, EP, EF, RP, RA, RF (see types.SLOT_NAMES).
    Absent or out-of-range neighbors get (max_range, 0, absent), making the
    features continuous at the sensor-range boundary.
    Returns (dist, dv, present) arrays of shape (N, 8).
    """
    x = np.asarray(x, dtype=float)
    vx = np.asarray(vx, dtype=float)
    lane = np.asarray(lane, dtype=np.int64)
    half_len = np.asarray(half_len, dtype=float)
    n = x.size
    dist = np.full((n, 8), float(max_range))
    dv = np.zeros((n, 8))
    present = np.zeros((n, 8), dtype=np.uint8)
    best = np.full((n, 8), np.inf)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dl = lane[j] - lane[i]
            if dl < -1 or dl > 1:
                continue
            dx = x[j] - x[i]
            adx = abs(dx)
            if dl == 0:
                slot = 3 if dx > 0 else 4  # EP / EF
            else:
                alongside = adx <= half_len[i] + half_len[j]
                if dl == 1:  # left lane
                    slot = 1 if alongside else (0 if dx > 0 else 2)
                else:  # right lane
                    slot = 6 if alongside else (5 if dx > 0 else 7)
            if adx < best[i, slot] and adx <= max_range:
                best[i, slot] = adx
                dist[i, slot] = adx
                dv[i, slot] = vx[j] - vx[i]
                present[i, slot] = 1
    return dist, dv, present
