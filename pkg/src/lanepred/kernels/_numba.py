"""Numba-jitted versions of the hot kernels. Must match ``_numpy.py``."""
from __future__ import annotations

import numpy as np
from numba import njit

LOG_2PI = float(np.log(2.0 * np.pi))


@njit(cache=True)
def _mixture_log_joint_impl(points, means, chols, log_weights):
    n, d = points.shape
    k = means.shape[0]
    out = np.empty((n, k))
    z = np.empty(d)
    for j in range(k):
        log_det = 0.0
        for a in range(d):
            log_det += 2.0 * np.log(chols[j, a, a])
        const = log_weights[j] - 0.5 * (d * LOG_2PI + log_det)
        for i in range(n):
            # forward substitution: L z = (x - mu)
            maha = 0.0
            for a in range(d):
                s = points[i, a] - means[j, a]
                for b in range(a):
                    s -= chols[j, a, b] * z[b]
                z[a] = s / chols[j, a, a]
                maha += z[a] * z[a]
            out[i, j] = const - 0.5 * maha
    return out


def mixture_log_joint(points, means, chols, log_weights):
    return _mixture_log_joint_impl(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(chols, dtype=np.float64),
        np.ascontiguousarray(log_weights, dtype=np.float64),
    )


@njit(cache=True)
def _neighbor_slots_impl(x, vx, lane, half_len, max_range):
    n = x.size
    dist = np.full((n, 8), max_range)
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
                slot = 3 if dx > 0 else 4
            else:
                alongside = adx <= half_len[i] + half_len[j]
                if dl == 1:
                    slot = 1 if alongside else (0 if dx > 0 else 2)
                else:
                    slot = 6 if alongside else (5 if dx > 0 else 7)
            if adx < best[i, slot] and adx <= max_range:
                best[i, slot] = adx
                dist[i, slot] = adx
                dv[i, slot] = vx[j] - vx[i]
                present[i, slot] = 1
    return dist, dv, present


def neighbor_slots(x, vx, lane, half_len, max_range):
    return _neighbor_slots_impl(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(vx, dtype=np.float64),
        np.ascontiguousarray(lane, dtype=np.int64),
        np.ascontiguousarray(half_len, dtype=np.float64),
        float(max_range),
    )
