"""Synthetic degradation: peak scaling, periodic blur and Poisson counts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, DomainError, ParameterError
from .spectral import ConvKernel, circular_convolve, identity_kernel, kernel_spectrum

__all__ = [
    "DegradeSpec",
    "derive_key",
    "scale_to_peak",
    "poisson_sample",
    "degrade",
    "normalize_01",
]

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(seed: int, stream: int = 0) -> int:
    """64-bit key for the sampler from a user seed and a stream id (e.g. image index)."""
    seed, stream = int(seed), int(stream)
    if seed < 0 or stream < 0:
        raise ParameterError("seed and stream must be nonnegative integers")
    return _mix64(_mix64(seed + _GAMMA) ^ ((stream + 1) * _GAMMA))


@dataclass(frozen=True)
class DegradeSpec:
    peak: float
    blur: ConvKernel = field(default_factory=identity_kernel)
    noise_seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.peak) and self.peak > 0):
            raise ParameterError(f"peak must be positive and finite, got {self.peak}")
        if int(self.noise_seed) < 0 or int(self.noise_seed) > _MASK:
            raise ParameterError("noise_seed must fit in an unsigned 64-bit integer")


def _max_positive(g, what):
    m = float(np.max(g))
    if not m > 0:
        raise DomainError(f"{what} must have a positive maximum, got {m}")
    return m


def scale_to_peak(g, peak: float) -> np.ndarray:
    """Rescale ``g`` so its maximum equals ``peak``."""
    if not peak > 0:
        raise ParameterError(f"peak must be positive, got {peak}")
    g = np.asarray(g, dtype=np.float64)
    m = _max_positive(g, "image")
    out = g * (peak / m)
    # pin the maximum exactly; the product can be off by one ulp
    out[g == m] = peak
    return out


def poisson_sample(mean, seed: int, stream: int = 0) -> np.ndarray:
    """Independent Poisson counts with the given per-pixel means.

    Reproducible across platforms: every pixel owns a SplitMix64 stream
    derived from ``(seed, stream, pixel index)``.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if not np.all(np.isfinite(mean)):
        raise DomainError("Poisson means must be finite")
    if np.any(mean < 0):
        raise DomainError("Poisson means must be nonnegative")
    key = derive_key(seed, stream)
    flat = np.ascontiguousarray(mean.ravel())
    return kernels.poisson_counts(flat, key).reshape(mean.shape)


def degrade(g, spec: DegradeSpec, *, noise: bool = True) -> np.ndarray:
    """Scale to ``spec.peak``, blur periodically, then draw Poisson counts.

    Multichannel input ``(C, M, N)`` is processed channel by channel with
    the peak taken over all channels and one stream per channel.
    ``noise=False`` returns the blurred mean image itself (test hook).
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim not in (2, 3):
        raise DataError(f"expected an (M, N) or (C, M, N) image, got shape {g.shape}")
    scaled = scale_to_peak(g, spec.peak)
    chans = scaled[None] if g.ndim == 2 else scaled
    M, N = chans.shape[1:]
    spec_k = kernel_spectrum(spec.blur, M, N)
    out = np.empty_like(chans)
    for c, ch in enumerate(chans):
        mean = circular_convolve(ch, spec_k)
        # roundoff from the FFT can leave tiny negatives where the blur is zero
        np.maximum(mean, 0.0, out=mean)
        if noise:
            mean = poisson_sample(mean, spec.noise_seed, spec.stream * chans.shape[0] + c)
        out[c] = mean
    return out[0] if g.ndim == 2 else out


def normalize_01(f):
    """Return ``(f / max(f), max(f))``."""
    f = np.asarray(f, dtype=np.float64)
    m = _max_positive(f, "degraded image")
    return f / m, m
