"""Luminance, normalisation, maximal-information cropping and patch sampling."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError
from ..scales import as_scale, scaled_extent
from .io import Image
from .resample import bicubic_resize

BT601 = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class NormalizationSpec:
    mean: float = 0.370
    std: float = 0.117

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError(f"std must be positive, got {self.std}")


BRATS_NORM = NormalizationSpec()


@dataclass
class PatchPair:
    lr: np.ndarray
    hr: np.ndarray
    scale: Fraction


def to_luminance(img):
    """Grayscale passes through; RGB is reduced with BT.601 weights."""
    if isinstance(img, Image):
        return Image(to_luminance(img.pixels), bit_depth=img.bit_depth)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    return arr @ BT601


def normalize(pixels: np.ndarray, spec: NormalizationSpec = BRATS_NORM) -> np.ndarray:
    return (np.asarray(pixels) / 255.0 - spec.mean) / spec.std


def denormalize(t: np.ndarray, spec: NormalizationSpec = BRATS_NORM) -> np.ndarray:
    return np.clip((np.asarray(t, dtype=np.float64) * spec.std + spec.mean) * 255.0, 0.0, 255.0)


def _window_sums(img: np.ndarray, ch: int, cw: int) -> np.ndarray:
    # every window is summed in the same order, so equal windows give bit-equal sums
    rows = sliding_window_view(img, cw, axis=1).sum(axis=-1)
    return sliding_window_view(rows, ch, axis=0).sum(axis=-1)


def maximal_info_crop(img: np.ndarray, crop_h: int | None = None, crop_w: int | None = None):
    """Return ``(crop, (row, col))`` for the window with the largest intensity sum.

    Crop extents default to half of each image extent.  Ties go to the smallest
    ``(row, col)`` in lexicographic order.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape[:2]
    crop_h = max(1, h // 2) if crop_h is None else crop_h
    crop_w = max(1, w // 2) if crop_w is None else crop_w
    if not (1 <= crop_h <= h and 1 <= crop_w <= w):
        raise ValueError(f"crop {crop_h}x{crop_w} does not fit image {h}x{w}")
    lum = to_luminance(arr)
    sums = _window_sums(lum, crop_h, crop_w)
    row, col = np.unravel_index(int(np.argmax(sums)), sums.shape)
    row, col = int(row), int(col)
    return arr[row:row + crop_h, col:col + crop_w].copy(), (row, col)


def sample_patches(crop: np.ndarray, r, count: int = 16, p_lr: int = 48, rng=None) -> list[PatchPair]:
    """Draw ``count`` HR patches of side ``floor(p_lr * r)`` uniformly from ``crop``.

    Each LR patch is the bicubic downsampling of its HR patch to ``p_lr``.
    """
    r = as_scale(r)
    rng = np.random.default_rng() if rng is None else rng
    crop = np.asarray(crop, dtype=np.float64)
    side = scaled_extent(p_lr, r)
    h, w = crop.shape[:2]
    if side > h or side > w:
        raise DataError(f"crop {h}x{w} too small: HR patch at scale {float(r):g} needs {side}x{side}")
    pairs = []
    for _ in range(count):
        y = int(rng.integers(h - side + 1))
        x = int(rng.integers(w - side + 1))
        hr = crop[y:y + side, x:x + side].copy()
        pairs.append(PatchPair(bicubic_resize(hr, p_lr, p_lr), hr, r))
    return pairs


def degrade(hr: np.ndarray, r):
    """LR/HR pair for whole-image evaluation: LR is ``floor(H / r)``, HR trimmed to ``floor(r * LR)``."""
    r = as_scale(r)
    h, w = hr.shape[:2]
    lh, lw = max(1, int(h // r)), max(1, int(w // r))
    th, tw = scaled_extent(lh, r), scaled_extent(lw, r)
    trimmed = np.asarray(hr, dtype=np.float64)[:th, :tw]
    return bicubic_resize(trimmed, lh, lw), trimmed
