"""Blur kernels, periodic convolution and the DFT multipliers used by the u-solve."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import DimensionError, NumericalError, ParameterError

__all__ = [
    "ConvKernel",
    "SpectralKernel",
    "gaussian_kernel",
    "motion_kernel",
    "identity_kernel",
    "parse_kernel",
    "kernel_spectrum",
    "laplacian_spectrum",
    "circular_convolve",
]

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class ConvKernel:
    """Small convolution stencil; ``anchor`` is the (row, col) tap acting on the centre pixel."""

    taps: np.ndarray
    anchor: tuple[int, int]
    name: str = "custom"

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.size == 0:
            raise DimensionError(f"kernel taps must be a nonempty 2-D array, got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ParameterError("kernel taps must be finite")
        r, c = self.anchor
        if not (0 <= r < taps.shape[0] and 0 <= c < taps.shape[1]):
            raise ParameterError(f"anchor {self.anchor} outside kernel of shape {taps.shape}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "anchor", (int(r), int(c)))

    @property
    def shape(self):
        return self.taps.shape


@dataclass(frozen=True)
class SpectralKernel:
    """Full ``M x N`` DFT multiplier array of a periodic linear operator."""

    multipliers: np.ndarray

    @property
    def shape(self):
        return self.multipliers.shape

    @property
    def dc(self) -> complex:
        return complex(self.multipliers[0, 0])

    def half(self) -> np.ndarray:
        """Multipliers restricted to the half-plane returned by ``rfft2``."""
        n = self.multipliers.shape[1]
        return self.multipliers[:, : n // 2 + 1]


def _centered_anchor(shape):
    # MATLAB filter centre: floor((size + 1) / 2), 1-based
    return ((shape[0] - 1) // 2, (shape[1] - 1) // 2)


def gaussian_kernel(size_rows: int, size_cols: int, sigma: float) -> ConvKernel:
    """Normalised Gaussian on a centred (possibly half-integer) coordinate grid."""
    if sigma <= 0 or not math.isfinite(sigma):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if size_rows < 1 or size_cols < 1:
        raise ParameterError(f"kernel size must be >= 1, got {size_rows}x{size_cols}")
    r = np.arange(size_rows) - (size_rows - 1) / 2.0
    c = np.arange(size_cols) - (size_cols - 1) / 2.0
    h = np.exp(-(r[:, None] ** 2 + c[None, :] ** 2) / (2.0 * sigma * sigma))
    h[h < _EPS * h.max()] = 0.0
    h /= h.sum()
    return ConvKernel(h, _centered_anchor(h.shape), f"gaussian:{size_rows}x{size_cols}:{sigma:g}")


def motion_kernel(length: float, angle_deg: float) -> ConvKernel:
    """Anti-aliased line segment of the given length, counterclockwise angle in degrees.

    Follows the perpendicular-distance construction of MATLAB's
    ``fspecial('motion')``; normalisation is by the exact tap sum.
    """
    if not length >= 1:
        raise ParameterError(f"motion length must be >= 1, got {length}")
    length = float(length)
    half = (length - 1) / 2.0
    phi = math.fmod(angle_deg, 180.0)
    if phi < 0:
        phi += 180.0
    phi = phi / 180.0 * math.pi
    cosphi, sinphi = math.cos(phi), math.sin(phi)
    xsign = float(np.sign(cosphi))
    linewdt = 1.0

    sx = math.trunc(half * cosphi + linewdt * xsign - length * _EPS)
    sy = math.trunc(half * sinphi + linewdt - length * _EPS)
    xs = np.arange(0, sx + xsign, xsign) if xsign != 0 else np.zeros(1)
    ys = np.arange(0, sy + 1)
    x, y = np.meshgrid(xs, ys)

    dist2line = y * cosphi - x * sinphi
    rad = np.hypot(x, y)
    last = (rad >= half) & (np.abs(dist2line) <= linewdt)
    x2last = half - np.abs((x[last] + dist2line[last] * sinphi) / cosphi)
    dist2line[last] = np.sqrt(dist2line[last] ** 2 + x2last**2)
    dist2line = linewdt + _EPS - np.abs(dist2line)
    dist2line[dist2line < 0] = 0.0

    rows, cols = dist2line.shape
    h = np.zeros((2 * rows - 1, 2 * cols - 1))
    h[:rows, :cols] = np.rot90(dist2line, 2)
    h[rows - 1 :, cols - 1 :] = dist2line
    h /= h.sum()
    if cosphi > 0:
        h = np.flipud(h)
    return ConvKernel(h, _centered_anchor(h.shape), f"motion:{length:g}:{angle_deg:g}")


def identity_kernel() -> ConvKernel:
    return ConvKernel(np.ones((1, 1)), (0, 0), "identity")


_GAUSS_RE = re.compile(r"^gaussian:(\d+)x(\d+):([0-9.eE+-]+)$")
_MOTION_RE = re.compile(r"^motion:([0-9.eE+-]+):([0-9.eE+-]+)$")


def parse_kernel(spec: str) -> ConvKernel:
    """Build a kernel from ``identity``, ``gaussian:RxC:sigma`` or ``motion:len:angle``."""
    s = spec.strip().lower()
    if s in ("identity", "none", ""):
        return identity_kernel()
    m = _GAUSS_RE.match(s)
    if m:
        return gaussian_kernel(int(m.group(1)), int(m.group(2)), float(m.group(3)))
    m = _MOTION_RE.match(s)
    if m:
        return motion_kernel(float(m.group(1)), float(m.group(2)))
    raise ParameterError(
        f"unrecognised kernel spec {spec!r}; expected identity, gaussian:RxC:sigma or motion:len:angle"
    )


def kernel_spectrum(k: ConvKernel, M: int, N: int) -> SpectralKernel:
    """DFT of ``k`` zero-padded to ``M x N`` with its anchor moved to index (0, 0)."""
    k1, k2 = k.shape
    if k1 > M or k2 > N:
        raise DimensionError(f"kernel {k1}x{k2} does not fit in a {M}x{N} grid")
    pad = np.zeros((M, N))
    ar, ac = k.anchor
    rows = (np.arange(k1) - ar) % M
    cols = (np.arange(k2) - ac) % N
    pad[np.ix_(rows, cols)] = k.taps
    return SpectralKernel(sfft.fft2(pad))


def laplacian_spectrum(M: int, N: int) -> SpectralKernel:
    """Eigenvalues ``2cos(2pi p/M) + 2cos(2pi q/N) - 4`` of the periodic Laplacian."""
    p = 2.0 * np.cos(2.0 * np.pi * np.arange(M) / M)
    q = 2.0 * np.cos(2.0 * np.pi * np.arange(N) / N)
    lap = p[:, None] + q[None, :] - 4.0
    lap[0, 0] = 0.0
    return SpectralKernel(lap.astype(np.complex128))


def circular_convolve(u, spec: SpectralKernel) -> np.ndarray:
    """Periodic convolution ``ifft2(spec * fft2(u))``, returned as a real array.

    Raises
    ------
    NumericalError
        If the imaginary residue exceeds ``1e-8 * max|u|``, which signals a
        spectrum without conjugate symmetry.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != spec.shape:
        raise DimensionError(f"image shape {u.shape} does not match spectrum shape {spec.shape}")
    out = sfft.ifft2(spec.multipliers * sfft.fft2(u))
    resid = np.abs(out.imag).max(initial=0.0)
    if resid > 1e-8 * np.abs(u).max(initial=0.0):
        raise NumericalError(
            f"imaginary residue {resid:.3g} after convolution; spectrum is not conjugate-symmetric"
        )
    return np.ascontiguousarray(out.real)
