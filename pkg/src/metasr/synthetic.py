"""Brain-MRI-like synthetic phantoms for toy runs and tests."""

from __future__ import annotations

import numpy as np


def _ellipse(yy, xx, cy, cx, ry, rx, angle):
    c, s = np.cos(angle), np.sin(angle)
    dy, dx = yy - cy, xx - cx
    u = (dx * c + dy * s) / rx
    v = (-dx * s + dy * c) / ry
    return u * u + v * v <= 1.0


def phantom(rng: np.random.Generator, size: int = 96, blobs: int = 6, supersample: int = 4) -> np.ndarray:
    """Dark background, a bright skull ring, and a few ellipses of varying intensity inside.

    Drawn on a ``supersample``-times finer grid and box-averaged, so edges are
    band-limited the way an acquired slice is rather than pixel staircases.
    """
    ss = supersample
    yy, xx = (np.mgrid[0:size * ss, 0:size * ss].astype(np.float64) + 0.5) / ss
    img = np.zeros((size * ss, size * ss))
    cy = size / 2 + rng.uniform(-0.05, 0.05) * size
    cx = size / 2 + rng.uniform(-0.05, 0.05) * size
    ry, rx = rng.uniform(0.36, 0.44, size=2) * size
    angle = rng.uniform(-0.3, 0.3)
    img[_ellipse(yy, xx, cy, cx, ry, rx, angle)] = rng.uniform(180, 230)
    img[_ellipse(yy, xx, cy, cx, ry * 0.9, rx * 0.9, angle)] = rng.uniform(90, 120)
    for _ in range(blobs):
        by = cy + rng.uniform(-0.5, 0.5) * ry
        bx = cx + rng.uniform(-0.5, 0.5) * rx
        br, bc = rng.uniform(0.06, 0.2, size=2) * size
        img[_ellipse(yy, xx, by, bx, br, bc, rng.uniform(0, np.pi))] = rng.uniform(40, 250)
    return img.reshape(size, ss, size, ss).mean(axis=(1, 3))


def phantom_set(count: int = 8, size: int = 96, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [phantom(rng, size) for _ in range(count)]
