"""numba versions of the kernels in ``_numpy``; same arithmetic, explicit loops."""

import math

import numba
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_MAX_INVERSION_K = 1000

_jit = numba.njit(cache=True, nogil=True, fastmath=False)


@_jit
def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@_jit
def _prox_aitv(xx, xy, alpha, beta, wx, wy):
    flat_x = xx.ravel()
    flat_y = xy.ravel()
    out_x = wx.ravel()
    out_y = wy.ravel()
    for i in range(flat_x.size):
        x1 = flat_x[i]
        x2 = flat_y[i]
        a1 = abs(x1)
        a2 = abs(x2)
        m = max(a1, a2)
        if m > beta:
            xi1 = _sign(x1) * max(a1 - beta, 0.0)
            xi2 = _sign(x2) * max(a2 - beta, 0.0)
            nxi = math.hypot(xi1, xi2)
            s = (nxi + alpha * beta) / nxi
            out_x[i] = s * xi1
            out_y[i] = s * xi2
        elif m > (1.0 - alpha) * beta:
            shrink = m + (alpha - 1.0) * beta
            if a1 >= a2:
                out_x[i] = shrink * _sign(x1)
                out_y[i] = 0.0
            else:
                out_x[i] = 0.0
                out_y[i] = shrink * _sign(x2)
        else:
            out_x[i] = 0.0
            out_y[i] = 0.0


def prox_aitv_field(xx, xy, alpha, beta):
    xx = np.ascontiguousarray(xx, dtype=np.float64)
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    wx = np.empty_like(xx)
    wy = np.empty_like(xy)
    _prox_aitv(xx, xy, float(alpha), float(beta), wx, wy)
    return wx, wy


@_jit
def _prox_iso(xx, xy, beta, wx, wy):
    flat_x = xx.ravel()
    flat_y = xy.ravel()
    out_x = wx.ravel()
    out_y = wy.ravel()
    for i in range(flat_x.size):
        n = math.hypot(flat_x[i], flat_y[i])
        if n > 0.0:
            s = max(n - beta, 0.0) / n
        else:
            s = 0.0
        out_x[i] = s * flat_x[i]
        out_y[i] = s * flat_y[i]


def prox_iso_field(xx, xy, beta):
    xx = np.ascontiguousarray(xx, dtype=np.float64)
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    wx = np.empty_like(xx)
    wy = np.empty_like(xy)
    _prox_iso(xx, xy, float(beta), wx, wy)
    return wx, wy


@_jit
def _mix(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@_jit
def _uniform(z):
    return float(_mix(z) >> _S11) * _INV53


@_jit
def _poisson(mean, key, out):
    for i in range(mean.size):
        lam = mean[i]
        state = _mix(key + np.uint64(i + 1) * _GAMMA)
        if lam <= 0.0:
            out[i] = 0.0
        elif lam < 10.0:
            state += _GAMMA
            u = _uniform(state)
            k = 0.0
            p = math.exp(-lam)
            s = p
            while u >= s and k < _MAX_INVERSION_K:
                k += 1.0
                p *= lam / k
                s += p
            out[i] = k
        else:
            slam = math.sqrt(lam)
            loglam = math.log(lam)
            b = 0.931 + 2.53 * slam
            a = -0.059 + 0.02483 * b
            invalpha = 1.1239 + 1.1328 / (b - 3.4)
            vr = 0.9277 - 3.6224 / (b - 2.0)
            while True:
                state += _GAMMA
                U = _uniform(state) - 0.5
                state += _GAMMA
                V = _uniform(state)
                us = 0.5 - abs(U)
                kk = math.floor((2.0 * a / us + b) * U + lam + 0.43)
                if us >= 0.07 and V <= vr:
                    out[i] = kk
                    break
                if kk < 0.0 or (us < 0.013 and V > us):
                    continue
                lhs = (math.log(V) if V > 0.0 else -math.inf) + math.log(invalpha) - math.log(a / (us * us) + b)
                if lhs <= -lam + kk * loglam - math.lgamma(kk + 1.0):
                    out[i] = kk
                    break


def poisson_counts(mean, key):
    mean = np.ascontiguousarray(mean, dtype=np.float64).ravel()
    out = np.zeros(mean.size)
    _poisson(mean, np.uint64(key), out)
    return out


@_jit
def _nearest(points, centroids, labels, best):
    n, d = points.shape
    K = centroids.shape[0]
    for i in range(n):
        bd = math.inf
        bl = 0
        for k in range(K):
            acc = 0.0
            for j in range(d):
                diff = points[i, j] - centroids[k, j]
                acc += diff * diff
            if acc < bd:
                bd = acc
                bl = k
        labels[i] = bl
        best[i] = bd


def nearest_centroid(points, centroids):
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    labels = np.zeros(points.shape[0], dtype=np.int64)
    best = np.empty(points.shape[0])
    _nearest(points, centroids, labels, best)
    return labels, best
