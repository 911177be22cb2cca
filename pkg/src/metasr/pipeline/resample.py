"""Separable bicubic resampling (Catmull-Rom, a = -0.5).

Output pixel ``o`` samples source coordinate ``(o + 0.5) * in / out - 0.5``
(half-pixel centres); taps outside the image are clamped to the edge.  The
same operator serves as the LR degradation and the interpolation baseline.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

A = -0.5


def cubic_kernel(x: np.ndarray, a: float = A) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


@lru_cache(maxsize=256)
def resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` matrix applying the 1-D bicubic resampler."""
    mat = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    frac = src - base
    rows = np.arange(n_out)
    for tap in range(-1, 3):
        idx = np.clip(base + tap, 0, n_in - 1)
        np.add.at(mat, (rows, idx), cubic_kernel(frac - tap))
    mat.setflags(write=False)
    return mat


def bicubic_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize an ``(H, W)`` or ``(H, W, C)`` array to ``(out_h, out_w)``."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output extents must be >= 1, got {out_h}x{out_w}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ry = resample_matrix(h, out_h)
    rx = resample_matrix(w, out_w)
    if img.ndim == 2:
        return ry @ img @ rx.T
    return np.einsum("oh,hwc,pw->opc", ry, img, rx)
