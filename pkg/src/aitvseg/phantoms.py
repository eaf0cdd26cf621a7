"""Synthetic test images standing in for the retina, brain and colour datasets.

Every generator returns ``(image, labels, values)``: the clean image, an
integer region map with labels ``1..K`` in ascending order of intensity
(grayscale) or in listing order (colour), and the per-region values.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "drive_phantom",
    "brain_phantom",
    "color_phantom",
    "two_value_phantom",
    "PHANTOMS",
    "REGION_NAMES",
]

DRIVE_VALUES = (200.0, 255.0)
BRAIN_VALUES = (10.0, 48.0, 106.0, 154.0)
COLOR_VALUES = (
    (0.92, 0.86, 0.70),
    (0.25, 0.45, 0.85),
    (0.80, 0.15, 0.10),
    (0.20, 0.60, 0.25),
    (0.15, 0.12, 0.20),
    (0.95, 0.80, 0.15),
)

REGION_NAMES = {
    "drive": ("background", "vessel"),
    "brain": ("background", "CSF", "GM", "WM"),
    "color": tuple(f"region{i}" for i in range(1, 7)),
    "two_value": ("low", "high"),
}


def _stamp_segment(dist2, p0, p1, yy, xx):
    """Minimise ``dist2`` in place with the squared distance to segment ``p0-p1``."""
    (y0, x0), (y1, x1) = p0, p1
    dy, dx = y1 - y0, x1 - x0
    L2 = dy * dy + dx * dx
    if L2 == 0:
        d2 = (yy - y0) ** 2 + (xx - x0) ** 2
    else:
        t = np.clip(((yy - y0) * dy + (xx - x0) * dx) / L2, 0.0, 1.0)
        d2 = (yy - y0 - t * dy) ** 2 + (xx - x0 - t * dx) ** 2
    np.minimum(dist2, d2, out=dist2)


def drive_phantom(rows: int = 584, cols: int = 565, seed: int = 0):
    """Branching vessel tree on a flat background (values 200 and 255).

    Vessels grow from a disc near the left-centre as gently curving paths
    whose width tapers from about 9 px to 2 px at each bifurcation.
    """
    rng = np.random.default_rng(seed)
    mask = np.zeros((rows, cols), dtype=bool)
    origin = (rows * (0.45 + 0.1 * rng.random()), cols * (0.22 + 0.06 * rng.random()))

    stack = []
    for base in (-0.5 * math.pi, 0.5 * math.pi, -0.15 * math.pi, 0.15 * math.pi):
        stack.append((origin, base + rng.normal(0, 0.12), 9.0, 0))

    while stack:
        (y, x), heading, width, depth = stack.pop()
        seg_len = rng.uniform(90, 160) * (0.8 ** depth)
        n_steps = max(int(seg_len / 6), 2)
        curvature = rng.normal(0, 0.05)
        pts = [(y, x)]
        for _ in range(n_steps):
            heading += curvature + rng.normal(0, 0.06)
            y += 6 * math.sin(heading)
            x += 6 * math.cos(heading)
            pts.append((y, x))
        _draw_polyline(mask, pts, width)
        inside = 0 <= y < rows and 0 <= x < cols
        if depth < 4 and width > 2.5 and inside:
            child = max(width * 0.72, 2.0)
            spread = rng.uniform(0.35, 0.7)
            stack.append(((y, x), heading + spread, child, depth + 1))
            stack.append(((y, x), heading - spread, child, depth + 1))
        elif inside and width > 2.0:
            stack.append(((y, x), heading + rng.normal(0, 0.2), max(width - 1.0, 2.0), depth + 1))

    labels = np.where(mask, 2, 1).astype(np.int64)
    img = np.where(mask, DRIVE_VALUES[1], DRIVE_VALUES[0])
    return img, labels, DRIVE_VALUES


def _draw_polyline(mask, pts, width):
    rows, cols = mask.shape
    r = width / 2.0
    pad = int(math.ceil(r)) + 1
    for p0, p1 in zip(pts[:-1], pts[1:]):
        y_lo = max(int(min(p0[0], p1[0])) - pad, 0)
        y_hi = min(int(max(p0[0], p1[0])) + pad + 1, rows)
        x_lo = max(int(min(p0[1], p1[1])) - pad, 0)
        x_hi = min(int(max(p0[1], p1[1])) + pad + 1, cols)
        if y_lo >= y_hi or x_lo >= x_hi:
            continue
        yy, xx = np.mgrid[y_lo:y_hi, x_lo:x_hi].astype(np.float64)
        d2 = np.full(yy.shape, np.inf)
        _stamp_segment(d2, p0, p1, yy, xx)
        mask[y_lo:y_hi, x_lo:x_hi] |= d2 <= r * r


def brain_phantom(rows: int = 104, cols: int = 87, seed: int = 0):
    """Axial-slice cartoon: background, CSF rim and ventricles, folded grey matter, white matter."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    cy, cx = (rows - 1) / 2.0, (cols - 1) / 2.0
    ay, ax = 0.44 * rows, 0.43 * cols
    theta = np.arctan2((yy - cy) / ay, (xx - cx) / ax)
    rho = np.hypot((yy - cy) / ay, (xx - cx) / ax)

    ph = rng.uniform(0, 2 * math.pi, size=3)
    wobble = 0.035 * np.sin(7 * theta + ph[0]) + 0.02 * np.sin(11 * theta + ph[1])
    folds = 0.09 * np.sin(9 * theta + ph[2]) + 0.04 * np.sin(15 * theta + ph[0])

    labels = np.ones((rows, cols), dtype=np.int64)
    head = rho <= 1.0 + wobble
    labels[head] = 2  # CSF rim
    labels[rho <= 0.9 + wobble] = 3  # grey matter
    labels[rho <= 0.66 + folds] = 4  # white matter

    # sulci: thin CSF fingers reaching into grey matter
    for k in range(8):
        ang = 2 * math.pi * k / 8 + ph[1]
        dth = np.angle(np.exp(1j * (theta - ang)))
        sulcus = (np.abs(dth) < 0.06) & (rho > 0.72) & (rho <= 0.95)
        labels[sulcus & head] = 2
    # ventricles
    for sgn in (-1.0, 1.0):
        vy = (yy - cy - 0.05 * rows) / (0.16 * rows)
        vx = (xx - cx - sgn * 0.09 * cols) / (0.05 * cols)
        labels[vy**2 + vx**2 <= 1.0] = 2
    # deep grey nuclei
    for sgn in (-1.0, 1.0):
        gy = (yy - cy + 0.02 * rows) / (0.07 * rows)
        gx = (xx - cx - sgn * 0.22 * cols) / (0.06 * cols)
        labels[(gy**2 + gx**2 <= 1.0) & (labels == 4)] = 3

    values = np.asarray(BRAIN_VALUES)
    return values[labels - 1], labels, BRAIN_VALUES


def color_phantom(rows: int = 375, cols: int = 500, seed: int = 0):
    """Six flat colour regions: background plus five overlapping shapes. Values in [0, 1]."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    labels = np.ones((rows, cols), dtype=np.int64)
    jit = lambda s: s * (1 + 0.08 * rng.uniform(-1, 1))  # noqa: E731

    # 2: large ellipse
    e = ((yy - jit(0.38 * rows)) / jit(0.27 * rows)) ** 2 + ((xx - jit(0.30 * cols)) / jit(0.22 * cols)) ** 2
    labels[e <= 1] = 2
    # 3: rotated rectangle
    ang = rng.uniform(-0.4, 0.4)
    ry = (yy - jit(0.62 * rows)) * math.cos(ang) - (xx - jit(0.68 * cols)) * math.sin(ang)
    rx = (yy - 0.62 * rows) * math.sin(ang) + (xx - 0.68 * cols) * math.cos(ang)
    labels[(np.abs(ry) <= jit(0.2 * rows)) & (np.abs(rx) <= jit(0.17 * cols))] = 3
    # 4: triangle
    ty, tx = jit(0.80 * rows), jit(0.22 * cols)
    h = jit(0.3 * rows)
    inside = (yy <= ty) & (yy >= ty - h) & (np.abs(xx - tx) <= (yy - (ty - h)) * 0.75)
    labels[inside] = 4
    # 5: disc
    labels[(yy - jit(0.25 * rows)) ** 2 + (xx - jit(0.78 * cols)) ** 2 <= jit(0.15 * rows) ** 2] = 5
    # 6: band crossing the ellipse
    band = np.abs((yy - 0.5 * rows) + 0.35 * (xx - 0.45 * cols)) <= jit(0.045 * rows)
    labels[band & (xx > 0.05 * cols) & (xx < 0.55 * cols)] = 6

    colors = np.asarray(COLOR_VALUES)
    img = np.moveaxis(colors[labels - 1], -1, 0)
    return np.ascontiguousarray(img), labels, COLOR_VALUES


def two_value_phantom(rows: int = 64, cols: int = 64, low: float = 0.2, high: float = 0.8, seed: int = 0):
    """Disc on a flat background; used by the solver convergence tests.

    ``seed`` is accepted for a uniform generator signature and has no effect.
    """
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    disc = (yy - rows / 2) ** 2 + (xx - cols / 2) ** 2 <= (0.3 * min(rows, cols)) ** 2
    labels = np.where(disc, 2, 1).astype(np.int64)
    return np.where(disc, high, low), labels, (low, high)


PHANTOMS = {
    "drive": drive_phantom,
    "brain": brain_phantom,
    "color": color_phantom,
    "two_value": two_value_phantom,
}
