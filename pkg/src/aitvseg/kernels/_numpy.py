"""Vectorised numpy implementations of the hot kernels.

These are the reference path; ``_numba`` mirrors each function loop by loop.
"""

import math

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_MAX_INVERSION_K = 1000


def prox_aitv_field(xx, xy, alpha, beta):
    """Per-pixel l1 - alpha*l2 prox of the 2-vectors ``(xx, xy)`` with step ``beta``."""
    ax = np.abs(xx)
    ay = np.abs(xy)
    m = np.maximum(ax, ay)

    xi_x = np.sign(xx) * np.maximum(ax - beta, 0.0)
    xi_y = np.sign(xy) * np.maximum(ay - beta, 0.0)
    nxi = np.hypot(xi_x, xi_y)
    big = m > beta
    scale = np.where(big, (nxi + alpha * beta) / np.where(nxi > 0, nxi, 1.0), 0.0)
    wx = scale * xi_x
    wy = scale * xi_y

    mid = ~big & (m > (1.0 - alpha) * beta)
    pick_x = mid & (ax >= ay)
    pick_y = mid & (ax < ay)
    shrink = m + (alpha - 1.0) * beta
    wx = np.where(pick_x, shrink * np.sign(xx), wx)
    wy = np.where(pick_y, shrink * np.sign(xy), wy)
    return wx, wy


def prox_iso_field(xx, xy, beta):
    """Per-pixel isotropic shrinkage ``max(|x| - beta, 0) x / |x|``."""
    n = np.hypot(xx, xy)
    scale = np.maximum(n - beta, 0.0) / np.where(n > 0, n, 1.0)
    return scale * xx, scale * xy


def _mix(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _next_uniform(state, idx):
    state[idx] += _GAMMA
    return (_mix(state[idx]) >> _S11).astype(np.float64) * _INV53


def poisson_counts(mean, key):
    """Poisson draws for a flat array of means from per-pixel SplitMix64 streams.

    Pixel ``i`` draws from the stream seeded at ``mix(key + (i + 1) * GAMMA)``.
    Means below 10 use inversion by sequential search; larger means use
    mean = np.asarray(mean, dtype=np.float64).ravel()
    """
    mean = np.asarray(mean, dtype=np.float64)
    n = mean.size
    idx_all = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = _mix(np.uint64(key) + idx_all * _GAMMA)
    out = np.zeros(n)

    small = np.flatnonzero((mean > 0) & (mean < 10))
    if small.size:
        lam = mean[small]
        u = _next_uniform(state, small)
        k = np.zeros(small.size)
        p = np.exp(-lam)
        s = p.copy()
        active = np.flatnonzero(u >= s)
        while active.size:
            k[active] += 1.0
            p[active] *= lam[active] / k[active]
            s[active] += p[active]
            keep = (u[active] >= s[active]) & (k[active] < _MAX_INVERSION_K)
            active = active[keep]
        out[small] = k

    large = np.flatnonzero(mean >= 10)
    if large.size:
        lam = mean[large]
        slam = np.sqrt(lam)
        loglam = np.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        pending = np.arange(large.size)
        res = np.zeros(large.size)
        while pending.size:
            pix = large[pending]
            U = _next_uniform(state, pix) - 0.5
            V = _next_uniform(state, pix)
            us = 0.5 - np.abs(U)
            kk = np.floor((2.0 * a[pending] / us + b[pending]) * U + lam[pending] + 0.43)
            quick = (us >= 0.07) & (V <= vr[pending])
            reject = ~quick & ((kk < 0) | ((us < 0.013) & (V > us)))
            test = np.flatnonzero(~quick & ~reject)
            accept = quick.copy()
            if test.size:
                t = pending[test]
                lg = np.array([math.lgamma(x + 1.0) for x in kk[test]])
                with np.errstate(divide="ignore"):
                    lhs = np.log(V[test]) + np.log(invalpha[t]) - np.log(a[t] / (us[test] ** 2) + b[t])
                rhs = -lam[t] + kk[test] * loglam[t] - lg
                accept[test] = lhs <= rhs
            res[pending[accept]] = kk[accept]
            pending = pending[~accept]
        out[large] = res
    return out


def nearest_centroid(points, centroids):
    """Index of the closest centroid for each row of ``points`` and the squared distance."""
    n = points.shape[0]
    best = np.full(n, np.inf)
    labels = np.zeros(n, dtype=np.int64)
    for k in range(centroids.shape[0]):
        d = points - centroids[k]
        d2 = np.einsum("ij,ij->i", d, d)
        closer = d2 < best
        best[closer] = d2[closer]
        labels[closer] = k
    return labels, best
