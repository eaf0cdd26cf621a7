"""Discrete image domain with periodic forward differences.

Images are ``(M, N)`` float arrays. Vector fields are ``(2, M, N)`` arrays
whose first slice is the horizontal component (differences along columns)
and whose second slice is the vertical component (differences along rows).
Documentation counts pixels from 1, the code from 0.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError, ParameterError
from .spectral import SpectralKernel, circular_convolve

__all__ = [
    "as_image",
    "as_field",
    "gradient",
    "divergence_adjoint",
    "norm_l1",
    "norm_l21",
    "norm_l2",
    "inner",
    "aitv_value",
    "energy",
    "check_alpha",
]


def as_image(u, name="image"):
    """Return ``u`` as a C-contiguous float64 2-D array after validation."""
    arr = np.ascontiguousarray(u, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def as_field(w, name="field"):
    arr = np.ascontiguousarray(w, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise DimensionError(f"{name} must have shape (2, M, N), got {arr.shape}")
    return arr


def gradient(u: np.ndarray) -> np.ndarray:
    """Periodic backward-difference gradient.

    ``(grad_x u)[i, j] = u[i, j] - u[i, j-1]`` and
    ``(grad_y u)[i, j] = u[i, j] - u[i-1, j]``, indices taken modulo the
    grid size so the first column/row wraps to the last.
    """
    u = np.asarray(u, dtype=np.float64)
    out = np.empty((2,) + u.shape)
    np.subtract(u, np.roll(u, 1, axis=1), out=out[0])
    np.subtract(u, np.roll(u, 1, axis=0), out=out[1])
    return out


def divergence_adjoint(w: np.ndarray) -> np.ndarray:
    """Apply the transpose of :func:`gradient` to a vector field.

    Satisfies ``<gradient(u), w> == <u, divergence_adjoint(w)>`` exactly in
    exact arithmetic; ``-divergence_adjoint(gradient(u))`` is the periodic
    five-point Laplacian.
    """
    w = np.asarray(w, dtype=np.float64)
    wx, wy = w[0], w[1]
    return (wx - np.roll(wx, -1, axis=1)) + (wy - np.roll(wy, -1, axis=0))


def inner(a, b) -> float:
    return float(np.vdot(np.ravel(a), np.ravel(b)))


def norm_l1(w) -> float:
    return float(np.abs(w).sum())


def norm_l21(w) -> float:
    w = np.asarray(w)
    return float(np.hypot(w[0], w[1]).sum())


def norm_l2(w) -> float:
    return float(np.sqrt(np.square(w).sum()))


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def aitv_value(u, alpha: float) -> float:
    """Weighted anisotropic-minus-isotropic total variation of ``u``."""
    alpha = check_alpha(alpha)
    g = gradient(u)
    return norm_l1(g) - alpha * norm_l21(g)


def energy(u, f, blur: SpectralKernel, lam: float, mu: float, alpha: float) -> float:
    """Smoothing objective with Poisson fidelity and AITV regularisation.

    ``lam * <Au - f log Au, 1> + mu/2 ||grad u||^2 + ||grad u||_1 - alpha ||grad u||_{2,1}``

    Raises
    ------
    DomainError
        If some entry of ``Au`` is not strictly positive; the message names
        the first offending pixel (1-based, row then column).
    """
    alpha = check_alpha(alpha)
    u = as_image(u, "u")
    f = as_image(f, "f")
    if u.shape != f.shape:
        raise DimensionError(f"u has shape {u.shape} but f has shape {f.shape}")
    au = circular_convolve(u, blur)
    bad = np.argwhere(au <= 0)
    if bad.size:
        i, j = bad[0]
        raise DomainError(
            f"Au must be positive; pixel ({i + 1}, {j + 1}) has value {au[i, j]:.6g}"
        )
    g = gradient(u)
    fidelity = float(np.sum(au - f * np.log(au)))
    return (
        lam * fidelity
        + 0.5 * mu * float(np.square(g).sum())
        + norm_l1(g)
        - alpha * norm_l21(g)
    )
