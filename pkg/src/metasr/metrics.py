"""PSNR and SSIM on single-channel images, plus set-level aggregation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .pipeline.patches import to_luminance

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeError(f"expected single-channel 2-D images, got shape {a.shape}")
    return a, b


def psnr(a, b, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; identical images give ``math.inf``."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    g /= g.sum()
    return g


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = sliding_window_view(img, k, axis=1) @ g
    return sliding_window_view(rows, k, axis=0) @ g


def ssim(a, b, peak: float = 255.0) -> float:
    """Mean SSIM over every full 11x11 Gaussian window (no padding)."""
    a, b = _pair(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    g = gaussian_window()
    c1 = (K1 * peak) ** 2
    c2 = (K2 * peak) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    psnr_db: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)
    mean_psnr: float = math.nan
    std_psnr: float = math.nan
    mean_ssim: float = math.nan
    std_ssim: float = math.nan

    @classmethod
    def from_values(cls, psnrs, ssims) -> "MetricReport":
        psnrs = [float(v) for v in psnrs]
        ssims = [float(v) for v in ssims]
        report = cls(psnrs, ssims)
        finite = [v for v in psnrs if math.isfinite(v)]
        if len(finite) < len(psnrs):
            warnings.warn(
                f"{len(psnrs) - len(finite)} of {len(psnrs)} PSNR values are infinite "
                "(identical images) and were left out of the aggregates",
                RuntimeWarning,
                stacklevel=2,
            )
        if finite:
            report.mean_psnr = float(np.mean(finite))
            report.std_psnr = float(np.std(finite))
        elif psnrs:
            report.mean_psnr = math.inf
        if ssims:
            report.mean_ssim = float(np.mean(ssims))
            report.std_ssim = float(np.std(ssims))
        return report


def evaluate_set(sr_images, hr_images, peak: float = 255.0) -> MetricReport:
    """Per-image luminance PSNR/SSIM with mean and population standard deviation."""
    sr_images, hr_images = list(sr_images), list(hr_images)
    if len(sr_images) != len(hr_images):
        raise ShapeError(f"{len(sr_images)} SR images but {len(hr_images)} HR images")
    psnrs, ssims = [], []
    for sr, hr in zip(sr_images, hr_images):
        sr_y, hr_y = to_luminance(sr), to_luminance(hr)
        psnrs.append(psnr(sr_y, hr_y, peak))
        ssims.append(ssim(sr_y, hr_y, peak))
    return MetricReport.from_values(psnrs, ssims)
