"""Clustering stage of the smoothing-then-thresholding segmentation.

Grayscale images are smoothed once and their intensities clustered; colour
images are smoothed per channel, augmented with CIELAB coordinates and the
six-channel vectors clustered. Every pixel is finally repainted with its
cluster mean.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, InfeasibleError, ParameterError
from .solver import AdmmConfig, SmoothResult, admm_smooth
from .spectral import ConvKernel

__all__ = [
    "Segmentation",
    "SegmentResult",
    "kmeans",
    "threshold_grayscale",
    "rgb_to_lab",
    "lift_and_stack",
    "piecewise_constant",
    "cluster_means",
    "sat_pipeline",
    "slat_pipeline",
    "thread_count",
    "ClampWarning",
]


class ClampWarning(UserWarning):
    """Input values fell outside [0, 1] and were clamped."""


@dataclass(frozen=True)
class Segmentation:
    """Label map with labels ``1..K`` and one centroid row per label."""

    labels: np.ndarray
    centroids: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        cents = np.array(self.centroids, dtype=np.float64)
        if cents.ndim == 1:
            cents = cents[:, None]
        if labels.ndim != 2:
            raise DimensionError(f"label map must be 2-D, got shape {labels.shape}")
        if cents.ndim != 2 or cents.shape[0] < 1:
            raise DimensionError(f"centroids must be a (K, d) array, got shape {cents.shape}")
        K = cents.shape[0]
        if labels.size and (labels.min() < 1 or labels.max() > K):
            raise ParameterError(f"labels must lie in 1..{K}")
        labels.setflags(write=False)
        cents.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", cents)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def masks(self):
        return [self.labels == k for k in range(1, self.K + 1)]


@dataclass
class SegmentResult:
    segmentation: Segmentation
    f_tilde: np.ndarray
    u_star: np.ndarray
    smooth: list = field(default_factory=list)


def thread_count() -> int:
    """Worker threads for independent solves, from ``AITVSEG_THREADS`` (default 1)."""
    raw = os.environ.get("AITVSEG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"AITVSEG_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


# --------------------------------------------------------------------------- k-means


def _as_points(points):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise DimensionError(f"points must be a nonempty (n, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must be finite")
    return pts


def _kmeanspp(pts, K, rng):
    n = pts.shape[0]
    cents = np.empty((K, pts.shape[1]))
    cents[0] = pts[rng.integers(n)]
    _, d2 = kernels.nearest_centroid(pts, cents[:1])
    for k in range(1, K):
        total = d2.sum()
        # total > 0 because K does not exceed the number of distinct points
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
        idx = min(idx, n - 1)
        while d2[idx] == 0.0:  # guard against landing on a zero-mass point at the boundary
            idx -= 1
        cents[k] = pts[idx]
        _, dk = kernels.nearest_centroid(pts, cents[k : k + 1])
        np.minimum(d2, dk, out=d2)
    return cents


def _means(pts, labels, K):
    counts = np.bincount(labels, minlength=K).astype(np.float64)
    sums = np.empty((K, pts.shape[1]))
    for j in range(pts.shape[1]):
        sums[:, j] = np.bincount(labels, weights=pts[:, j], minlength=K)
    return sums, counts


def _lloyd(pts, cents, max_iter):
    """Lloyd iterations from ``cents``; returns centroids, labels, WCSS history."""
    K = cents.shape[0]
    labels, d2 = kernels.nearest_centroid(pts, cents)
    history = [float(d2.sum())]
    for _ in range(max_iter):
        sums, counts = _means(pts, labels, K)
        empty = np.flatnonzero(counts == 0)
        for k in empty:
            # move the empty centroid onto the worst-served point
            far = int(np.argmax(d2))
            labels[far] = k
            d2[far] = 0.0
            sums, counts = _means(pts, labels, K)
        cents = sums / counts[:, None]
        new_labels, d2 = kernels.nearest_centroid(pts, cents)
        history.append(float(d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    sums, counts = _means(pts, labels, K)
    cents = sums / counts[:, None]
    return cents, labels, history


def _distinct_at_least(pts, K):
    if K <= 1:
        return True
    # cheap sufficient check before the sort-based count
    if pts.shape[0] < K:
        return False
    return np.unique(pts, axis=0).shape[0] >= K


def kmeans(points, K: int, seed: int = 0, restarts: int = 10, max_iter: int = 100, return_history: bool = False):
    """k-means++ seeded Lloyd clustering, best of ``restarts`` by within-cluster sum of squares.

    Returns ``(centroids, labels)`` with labels in ``0..K-1``; with
    ``return_history=True`` also the per-iteration WCSS of the winning run.
    Restart ``r`` draws from ``default_rng([seed, r])`` so the result does
    not depend on how restarts are scheduled.

    Raises
    ------
    InfeasibleError
        If ``K`` exceeds the number of distinct points.
    """
    if int(K) != K or K < 1:
        raise ParameterError(f"K must be a positive integer, got {K}")
    if restarts < 1 or max_iter < 1:
        raise ParameterError("restarts and max_iter must be >= 1")
    K = int(K)
    pts = _as_points(points)
    if not _distinct_at_least(pts, K):
        raise InfeasibleError(f"cannot form {K} clusters: fewer than {K} distinct points")
    if K == 1:
        c = pts.mean(axis=0, keepdims=True)
        labels = np.zeros(pts.shape[0], dtype=np.int64)
        hist = [float(np.square(pts - c).sum())]
        return (c, labels, hist) if return_history else (c, labels)

    best = None
    for r in range(restarts):
        rng = np.random.default_rng([int(seed), r])
        cents, labels, hist = _lloyd(pts, _kmeanspp(pts, K, rng), max_iter)
        wcss = float(np.square(pts - cents[labels]).sum())
        if best is None or wcss < best[0]:
            best = (wcss, cents, labels, hist)
    _, cents, labels, hist = best
    return (cents, labels, hist) if return_history else (cents, labels)


def threshold_grayscale(u_star, K: int, seed: int = 0, restarts: int = 10) -> Segmentation:
    """Cluster pixel intensities; label 1 is the darkest cluster."""
    u = np.asarray(u_star, dtype=np.float64)
    if u.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {u.shape}")
    cents, labels = kmeans(u.reshape(-1, 1), K, seed=seed, restarts=restarts)
    order = np.argsort(cents[:, 0], kind="stable")
    rank = np.empty(K, dtype=np.int64)
    rank[order] = np.arange(1, K + 1)
    return Segmentation(rank[labels].reshape(u.shape), cents[order])


# --------------------------------------------------------------------------- colour

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# reference white is the image of RGB = (1, 1, 1), so white maps to L = 100, a = b = 0 exactly
_WHITE = _SRGB_TO_XYZ.sum(axis=1)
_DELTA = 6.0 / 29.0


def _clamp01(img, what):
    img = np.asarray(img, dtype=np.float64)
    n_bad = int(np.count_nonzero((img < 0) | (img > 1)))
    if n_bad:
        warnings.warn(f"{n_bad} {what} values outside [0, 1] were clamped", ClampWarning, stacklevel=3)
        img = np.clip(img, 0.0, 1.0)
    return img


def rgb_to_lab(img) -> np.ndarray:
    """sRGB (D65) in [0, 1] to CIELAB; input and output are ``(3, M, N)``."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise DimensionError(f"expected a (3, M, N) image, got shape {img.shape}")
    rgb = _clamp01(img, "RGB")
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = np.tensordot(_SRGB_TO_XYZ, lin, axes=1) / _WHITE[:, None, None]
    ft = np.where(xyz > _DELTA**3, np.cbrt(xyz), xyz / (3 * _DELTA**2) + 4.0 / 29.0)
    L = 116.0 * ft[1] - 16.0
    a = 500.0 * (ft[0] - ft[1])
    b = 200.0 * (ft[1] - ft[2])
    return np.stack((L, a, b))


def _minmax(ch):
    lo, hi = float(ch.min()), float(ch.max())
    if hi <= lo:
        return np.zeros_like(ch)
    return (ch - lo) / (hi - lo)


def lift_and_stack(u_star) -> np.ndarray:
    """Six-channel feature image: clamped RGB plus CIELAB, each channel rescaled to [0, 1].

    A constant channel becomes all zeros.
    """
    u = np.asarray(u_star, dtype=np.float64)
    if u.ndim != 3 or u.shape[0] != 3:
        raise DimensionError(f"expected a (3, M, N) image, got shape {u.shape}")
    rgb = np.clip(u, 0.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        lab = rgb_to_lab(rgb)
    six = np.concatenate((rgb, lab))
    return np.stack([_minmax(c) for c in six])


# --------------------------------------------------------------------------- regions


def cluster_means(img, labels, K: int) -> np.ndarray:
    """``(K, d)`` per-label means of a ``(d, M, N)`` or ``(M, N)`` image."""
    img = np.asarray(img, dtype=np.float64)
    chans = img[None] if img.ndim == 2 else img
    lab = np.asarray(labels).ravel() - 1
    counts = np.bincount(lab, minlength=K).astype(np.float64)
    if np.any(counts == 0):
        raise InfeasibleError("some label has no pixels; its mean is undefined")
    out = np.empty((K, chans.shape[0]))
    for j, ch in enumerate(chans):
        out[:, j] = np.bincount(lab, weights=ch.ravel(), minlength=K) / counts
    return out


def piecewise_constant(seg: Segmentation, centroids=None) -> np.ndarray:
    """Paint every pixel with its region's centroid; returns ``(d, M, N)``.

    ``centroids`` overrides ``seg.centroids`` (e.g. to paint colour means
    computed in a different feature space).
    """
    cents = seg.centroids if centroids is None else np.asarray(centroids, dtype=np.float64)
    if cents.ndim == 1:
        cents = cents[:, None]
    if cents.shape[0] != seg.K:
        raise DimensionError(f"need {seg.K} centroid rows, got {cents.shape[0]}")
    return np.ascontiguousarray(np.moveaxis(cents[seg.labels - 1], -1, 0))


def sat_pipeline(f, blur: ConvKernel, config: AdmmConfig, K: int, seed: int = 0, restarts: int = 10) -> SegmentResult:
    """Smooth a grayscale image, threshold by k-means, repaint with cluster means."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2:
        raise DimensionError(f"grayscale pipeline needs a 2-D image, got shape {f.shape}")
    res = admm_smooth(f, blur, config)
    seg = threshold_grayscale(res.u, K, seed=seed, restarts=restarts)
    return SegmentResult(seg, piecewise_constant(seg)[0], res.u, [res])


def _smooth_channels(f, blur, config) -> list[SmoothResult]:
    n = thread_count()
    if n == 1:
        return [admm_smooth(ch, blur, config) for ch in f]
    with ThreadPoolExecutor(max_workers=min(n, f.shape[0])) as ex:
        return list(ex.map(lambda ch: admm_smooth(ch, blur, config), f))


def slat_pipeline(f, blur: ConvKernel, config: AdmmConfig, K: int, seed: int = 0, restarts: int = 10) -> SegmentResult:
    """Colour pipeline: per-channel smoothing, Lab lifting, k-means on six channels.

    The returned ``f_tilde`` is ``(3, M, N)`` and paints each region with the
    mean of the clamped smoothed RGB over that region, which equals the RGB
    part of the six-channel centroid mapped back through the min-max scaling.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3 or f.shape[0] != 3:
        raise DimensionError(f"colour pipeline needs a (3, M, N) image, got shape {f.shape}")
    results = _smooth_channels(f, blur, config)
    u = np.stack([r.u for r in results])
    six = lift_and_stack(u)
    cents, labels = kmeans(six.reshape(6, -1).T, K, seed=seed, restarts=restarts)
    seg = Segmentation(labels.reshape(u.shape[1:]) + 1, cents)
    rgb_means = cluster_means(np.clip(u, 0.0, 1.0), seg.labels, seg.K)
    return SegmentResult(seg, piecewise_constant(seg, rgb_means), u, results)
