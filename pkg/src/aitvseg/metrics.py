"""Overlap and reconstruction-error scores."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = ["dice", "dice_per_region", "psnr", "match_labels", "apply_permutation"]


def dice(S, S_prime) -> float:
    """``2|S & S'| / (|S| + |S'|)``; two empty masks score 1.0."""
    S = np.asarray(S, dtype=bool)
    S_prime = np.asarray(S_prime, dtype=bool)
    if S.shape != S_prime.shape:
        raise DimensionError(f"mask shapes differ: {S.shape} vs {S_prime.shape}")
    total = int(S.sum()) + int(S_prime.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(S, S_prime).sum()) / total


def dice_per_region(labels, gt_labels, K: int) -> list[float]:
    """DICE of region ``k`` against ground-truth region ``k`` for ``k = 1..K``."""
    labels = np.asarray(labels)
    gt_labels = np.asarray(gt_labels)
    if labels.shape != gt_labels.shape:
        raise DimensionError(f"label maps differ in shape: {labels.shape} vs {gt_labels.shape}")
    return [dice(gt_labels == k, labels == k) for k in range(1, K + 1)]


def psnr(f, f_tilde, P: float, variant: str = "paper") -> float:
    """Peak signal-to-noise ratio in dB.

    ``variant='paper'``: ``20 log10(n P / SSE)`` with ``n`` the number of
    pixels per channel and SSE summed over every channel.
    ``variant='standard'``: ``20 log10(P / sqrt(MSE))`` with MSE over all
    entries. Identical inputs give ``+inf``.
    """
    f = np.asarray(f, dtype=np.float64)
    f_tilde = np.asarray(f_tilde, dtype=np.float64)
    if f.shape != f_tilde.shape:
        raise DimensionError(f"image shapes differ: {f.shape} vs {f_tilde.shape}")
    if not P > 0:
        raise ParameterError(f"peak P must be positive, got {P}")
    sse = float(np.square(f - f_tilde).sum())
    if sse == 0.0:
        return math.inf
    if variant == "paper":
        n_pix = f.shape[-2] * f.shape[-1]
        return 20.0 * math.log10(n_pix * P / sse)
    if variant == "standard":
        return 20.0 * math.log10(P / math.sqrt(sse / f.size))
    raise ParameterError(f"variant must be 'paper' or 'standard', got {variant!r}")


def match_labels(labels, gt_labels, K: int) -> dict[int, int]:
    """Map predicted labels onto ground-truth labels by greedy maximum DICE.

    Repeatedly takes the unassigned (predicted, truth) pair with the largest
    DICE; ties go to the lowest truth label, then the lowest predicted label.
    Returns ``{predicted: truth}``, a bijection on ``1..K``.
    """
    labels = np.asarray(labels)
    gt_labels = np.asarray(gt_labels)
    if labels.shape != gt_labels.shape:
        raise DimensionError(f"label maps differ in shape: {labels.shape} vs {gt_labels.shape}")
    for name, lab in (("predicted", labels), ("ground-truth", gt_labels)):
        if lab.size and (lab.min() < 1 or lab.max() > K):
            raise ParameterError(f"{name} labels must lie in 1..{K}")
    # contingency table gives every pairwise DICE at once
    cont = np.bincount((labels.ravel() - 1) * K + (gt_labels.ravel() - 1), minlength=K * K)
    cont = cont.reshape(K, K).astype(np.float64)
    sizes_p = cont.sum(axis=1)
    sizes_t = cont.sum(axis=0)
    denom = sizes_p[:, None] + sizes_t[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.where(denom > 0, 2.0 * cont / np.where(denom > 0, denom, 1.0), 1.0)

    mapping: dict[int, int] = {}
    free_p = list(range(K))
    free_t = list(range(K))
    while free_p:
        best = None
        for t in free_t:
            for p in free_p:
                if best is None or D[p, t] > D[best[0], best[1]]:
                    best = (p, t)
        p, t = best
        mapping[p + 1] = t + 1
        free_p.remove(p)
        free_t.remove(t)
    return dict(sorted(mapping.items()))


def apply_permutation(labels, mapping: dict[int, int]) -> np.ndarray:
    labels = np.asarray(labels)
    lut = np.zeros(max(mapping) + 1, dtype=labels.dtype)
    for src, dst in mapping.items():
        lut[src] = dst
    return lut[labels]
