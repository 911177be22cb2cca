"""Meta-upscale: per-pixel filter weights predicted from position and scale.

Every HR pixel ``(i, j)`` is projected to LR pixel ``(floor(i/r), floor(j/r))``.
A small dense network maps ``(frac(i/r), frac(j/r), 1/r)`` to a filter of
``out_channels x C x 3 x 3`` weights, which is applied to the 3x3 LR feature
patch centred on the projected pixel.  One parameter set serves every scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from .errors import ShapeError
from .nn import Dense, Module, Tensor
from .nn import functional as F
from .nn.tensor import take
from .scales import as_scale, scaled_extent

KERNEL = 3


class PixelProjection(NamedTuple):
    hr_index: tuple[int, int]
    lr_index: tuple[int, int]
    rel_offset: tuple[float, float]
    inv_scale: float


def _axis_projection(n: int, r: Fraction) -> tuple[np.ndarray, np.ndarray]:
    # i / r = i * q / p exactly; floor and remainder in integers
    p, q = r.numerator, r.denominator
    iq = np.arange(n, dtype=np.int64) * q
    return iq // p, (iq % p) / p


@dataclass(frozen=True)
class Projection:
    """Row-major HR-to-LR projection; separable, so stored per axis."""

    hr_h: int
    hr_w: int
    scale: Fraction
    lr_rows: np.ndarray
    lr_cols: np.ndarray
    offset_y: np.ndarray
    offset_x: np.ndarray

    @property
    def inv_scale(self) -> float:
        return float(1 / self.scale)

    @property
    def hr_shape(self) -> tuple[int, int]:
        return self.hr_h, self.hr_w

    def __len__(self) -> int:
        return self.hr_h * self.hr_w

    def __getitem__(self, k: int) -> PixelProjection:
        if not 0 <= k < len(self):
            raise IndexError(k)
        i, j = divmod(k, self.hr_w)
        return PixelProjection(
            (i, j),
            (int(self.lr_rows[i]), int(self.lr_cols[j])),
            (float(self.offset_y[i]), float(self.offset_x[j])),
            self.inv_scale,
        )

    def __iter__(self) -> Iterator[PixelProjection]:
        return (self[k] for k in range(len(self)))

    @property
    def lr_index(self) -> np.ndarray:
        rows, cols = np.meshgrid(self.lr_rows, self.lr_cols, indexing="ij")
        return np.stack([rows.ravel(), cols.ravel()], axis=1)

    @property
    def rel_offset(self) -> np.ndarray:
        oy, ox = np.meshgrid(self.offset_y, self.offset_x, indexing="ij")
        return np.stack([oy.ravel(), ox.ravel()], axis=1)

    def wpn_inputs(self) -> np.ndarray:
        """The ``(H*W, 3)`` matrix of (offset_y, offset_x, 1/r) queries."""
        off = self.rel_offset
        return np.column_stack([off, np.full(len(off), self.inv_scale)])


@lru_cache(maxsize=128)
def _project_cached(hr_h: int, hr_w: int, r: Fraction) -> Projection:
    rows, oy = _axis_projection(hr_h, r)
    cols, ox = _axis_projection(hr_w, r)
    for arr in (rows, oy, cols, ox):
        arr.setflags(write=False)
    return Projection(hr_h, hr_w, r, rows, cols, oy, ox)


def project(hr_h: int, hr_w: int, r) -> Projection:
    r = as_scale(r)
    if r < 1:
        raise ValueError(f"scale must be >= 1 (this module only upscales), got {float(r):g}")
    if hr_h < 1 or hr_w < 1:
        raise ValueError(f"HR extents must be >= 1, got {hr_h}x{hr_w}")
    return _project_cached(int(hr_h), int(hr_w), r)


class WeightPredictionNet(Module):
    def __init__(self, rng: np.random.Generator, hidden: int = 256, in_features: int = 64,
                 out_channels: int = 1):
        self.out_channels = out_channels
        self.in_features = in_features
        self.fc1 = Dense(3, hidden, rng)
        self.fc2 = Dense(hidden, hidden, rng)
        self.fc3 = Dense(hidden, out_channels * in_features * KERNEL * KERNEL, rng)
        # Predicted filters feed a C*3*3-tap inner product, so they are scaled to that
        # fan-in.  A fixed gain rather than a smaller init: Adam steps ignore parameter
        # magnitude, and a shrunken fc3 would still move the filters at full size.
        self.output_gain = 1.0 / np.sqrt(in_features * KERNEL * KERNEL)

    @property
    def output_size(self) -> int:
        return self.out_channels * self.in_features * KERNEL * KERNEL

    def forward(self, queries):
        h = F.relu(self.fc1(queries))
        h = F.relu(self.fc2(h))
        return self.fc3(h) * self.output_gain


def predict_weights(wpn: WeightPredictionNet, projection: Projection) -> Tensor:
    """``(H*W, out_channels*C*9)`` predicted filters, one row per HR pixel.

    Identical queries are evaluated once and gathered back to every pixel, which
    gives the same numbers as evaluating each pixel separately.
    """
    if len(projection) == 0:
        raise ValueError("empty projection")
    uy, inv_y = np.unique(projection.offset_y, return_inverse=True)
    ux, inv_x = np.unique(projection.offset_x, return_inverse=True)
    gy, gx = np.meshgrid(uy, ux, indexing="ij")
    queries = np.column_stack([gy.ravel(), gx.ravel(), np.full(gy.size, projection.inv_scale)])
    dtype = wpn.fc1.weight.dtype
    unique_weights = wpn(Tensor(queries, dtype=dtype))
    index = (inv_y[:, None] * len(ux) + inv_x[None, :]).ravel()
    return take(unique_weights, index)


def _unfold_clamped(fd: np.ndarray) -> np.ndarray:
    """``(h*w, n, c*9)`` edge-clamped 3x3 patches, ordered ``(c, di, dj)`` like the filters."""
    n, c, h, w = fd.shape
    fp = np.pad(fd, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="edge")
    win = sliding_window_view(fp, (KERNEL, KERNEL), axis=(2, 3))
    return win.transpose(2, 3, 0, 1, 4, 5).reshape(h * w, n, c * KERNEL * KERNEL)


def _fold_clamped(dp: np.ndarray, n: int, c: int, h: int, w: int) -> np.ndarray:
    """Adjoint of :func:`_unfold_clamped`."""
    dp = dp.reshape(h, w, n, c, KERNEL, KERNEL)
    dfp = np.zeros((n, c, h + 2, w + 2), dtype=dp.dtype)
    for di in range(KERNEL):
        for dj in range(KERNEL):
            dfp[:, :, di:di + h, dj:dj + w] += dp[:, :, :, :, di, dj].transpose(2, 3, 0, 1)
    rows = dfp[:, :, 1:h + 1, :].copy()
    rows[:, :, 0, :] += dfp[:, :, 0, :]
    rows[:, :, -1, :] += dfp[:, :, h + 1, :]
    out = rows[:, :, :, 1:w + 1].copy()
    out[:, :, :, 0] += rows[:, :, :, 0]
    out[:, :, :, -1] += rows[:, :, :, w + 1]
    return out


def apply(features: Tensor, weights: Tensor, projection: Projection, out_channels: int) -> Tensor:
    """Per-pixel inner product of predicted filters with edge-clamped 3x3 LR feature patches."""
    n, c, h, w = features.shape
    hh, ww = projection.hr_shape
    hw = hh * ww
    k = c * KERNEL * KERNEL
    if weights.shape[0] != hw:
        raise ShapeError(f"predicted weights have {weights.shape[0]} rows, HR image has {hw} pixels")
    if weights.shape[1] != out_channels * k:
        raise ShapeError(
            f"weight rows have length {weights.shape[1]}, expected out_channels*C*9 = {out_channels * k}"
        )
    if (scaled_extent(h, projection.scale), scaled_extent(w, projection.scale)) != (hh, ww):
        raise ShapeError(
            f"LR features {h}x{w} at scale {float(projection.scale):g} do not give HR {hh}x{ww}"
        )
    lr_flat = (projection.lr_rows[:, None] * w + projection.lr_cols[None, :]).ravel()
    patches = _unfold_clamped(features.data)[lr_flat]  # (hw, n, k)
    wr = weights.data.reshape(hw, out_channels, k)
    out = np.matmul(patches, wr.transpose(0, 2, 1))  # (hw, n, out)
    out = np.ascontiguousarray(out.transpose(1, 2, 0)).reshape(n, out_channels, hh, ww)

    def backward(grad):
        g = np.ascontiguousarray(grad.reshape(n, out_channels, hw).transpose(2, 1, 0))  # (hw, out, n)
        dw = np.matmul(g, patches).reshape(weights.shape) if weights.requires_grad else None
        dfeat = None
        if features.requires_grad:
            dpatch = np.matmul(g.transpose(0, 2, 1), wr)  # (hw, n, k)
            scatter = sparse.csr_matrix(
                (np.ones(hw, dtype=dpatch.dtype), (lr_flat, np.arange(hw))), shape=(h * w, hw)
            )
            dp = np.asarray(scatter @ dpatch.reshape(hw, n * k), dtype=dpatch.dtype)
            dfeat = _fold_clamped(dp, n, c, h, w)
        return dfeat, dw

    return Tensor._make(out, (features, weights), backward)


def upscale(features: Tensor, r, wpn: WeightPredictionNet, out_channels: int | None = None) -> Tensor:
    """Upscale LR feature maps ``(N, C, h, w)`` to ``(N, out, floor(r*h), floor(r*w))``."""
    out_channels = wpn.out_channels if out_channels is None else out_channels
    h, w = features.shape[2:]
    proj = project(scaled_extent(h, r), scaled_extent(w, r), r)
    return apply(features, predict_weights(wpn, proj), proj, out_channels)


class MetaUpscale(Module):
    def __init__(self, rng: np.random.Generator, hidden: int = 256, in_features: int = 64,
                 out_channels: int = 1):
        self.wpn = WeightPredictionNet(rng, hidden, in_features, out_channels)

    @property
    def out_channels(self) -> int:
        return self.wpn.out_channels

    def forward(self, features, r):
        return upscale(features, r, self.wpn)
