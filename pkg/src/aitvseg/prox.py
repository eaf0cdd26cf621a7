"""Closed-form proximal operators on 2-vectors and on whole vector fields."""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DimensionError, ParameterError
from .grid import check_alpha

__all__ = ["prox_l1_minus_l2", "prox_l21", "prox_field", "prox_objective"]


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not beta > 0:
        raise ParameterError(f"prox step beta must be positive, got {beta}")
    return beta


def prox_objective(y, x, alpha, beta):
    """``||y||_1 - alpha ||y||_2 + ||x - y||^2 / (2 beta)`` along the last axis."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return (
        np.abs(y).sum(-1)
        - alpha * np.sqrt(np.square(y).sum(-1))
        + np.square(x - y).sum(-1) / (2.0 * beta)
    )


def prox_l1_minus_l2(x, alpha: float, beta: float) -> np.ndarray:
    """Minimiser of ``||y||_1 - alpha ||y||_2 + ||x - y||_2^2 / (2 beta)``.

    Three regimes, by ``m = ||x||_inf``:

    * ``m > beta``: soft-threshold ``x`` by ``beta`` to get ``xi`` and
      stretch it outward by ``alpha * beta``;
    * ``(1 - alpha) beta < m <= beta``: keep only the largest-magnitude entry
      (lowest index on ties), shrunk by ``(1 - alpha) beta``;
    * otherwise zero.

    Comparisons use exact floating-point ordering, so ``m == beta`` falls in
    the 1-sparse regime.
    """
    alpha = check_alpha(alpha)
    beta = _check_beta(beta)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise DimensionError(f"expected a 2-vector, got shape {x.shape}")
    ax = np.abs(x)
    m = ax.max()
    if m > beta:
        xi = np.sign(x) * np.maximum(ax - beta, 0.0)
        nxi = float(np.hypot(xi[0], xi[1]))
        assert nxi > 0.0
        return (nxi + alpha * beta) * xi / nxi
    out = np.zeros(2)
    if m > (1.0 - alpha) * beta:
        i = int(np.argmax(ax))  # first index on ties
        out[i] = (ax[i] + (alpha - 1.0) * beta) * np.sign(x[i])
    return out


def prox_l21(x, beta: float) -> np.ndarray:
    """Isotropic shrinkage ``max(||x|| - beta, 0) x / ||x||``; zero at ``x = 0``."""
    beta = _check_beta(beta)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise DimensionError(f"expected a 2-vector, got shape {x.shape}")
    n = float(np.hypot(x[0], x[1]))
    if n == 0.0:
        return np.zeros(2)
    return max(n - beta, 0.0) / n * x


def prox_field(w_in, alpha: float, beta: float, mode: str = "aitv") -> np.ndarray:
    """Apply the per-pixel prox to every 2-vector of a ``(2, M, N)`` field.

    ``mode='aitv'`` uses :func:`prox_l1_minus_l2`, ``mode='iso'`` uses
    :func:`prox_l21` and ignores ``alpha``.
    """
    beta = _check_beta(beta)
    w_in = np.asarray(w_in, dtype=np.float64)
    if w_in.ndim != 3 or w_in.shape[0] != 2:
        raise DimensionError(f"field must have shape (2, M, N), got {w_in.shape}")
    if mode == "aitv":
        alpha = check_alpha(alpha)
        wx, wy = kernels.prox_aitv_field(w_in[0], w_in[1], alpha, beta)
    elif mode == "iso":
        wx, wy = kernels.prox_iso_field(w_in[0], w_in[1], beta)
    else:
        raise ParameterError(f"mode must be 'aitv' or 'iso', got {mode!r}")
    return np.stack((wx, wy))
