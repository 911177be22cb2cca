"""Differentiable layer primitives with hand-derived backward rules."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .tensor import Tensor, as_tensor


def conv_output_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation over NCHW input with an OCkk weight."""
    x = as_tensor(x)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, wc, k, k2 = weight.shape
    if wc != c:
        raise ShapeError(f"conv2d input has {c} channels (shape {x.shape}) but weight expects {wc} (shape {weight.shape})")
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d kernel must be square and odd, got {k}x{k2}")
    if padding < 0 or stride < 1:
        raise ShapeError(f"invalid padding={padding} / stride={stride}")
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d input {x.shape} too small for kernel {k} with padding {padding}")

    # channels-last with (ki, kj, c) column order keeps the im2col copy contiguous
    xh = np.zeros((n, h + 2 * padding, w + 2 * padding, c), dtype=x.dtype)
    xh[:, padding:padding + h, padding:padding + w, :] = x.data.transpose(0, 2, 3, 1)
    win = sliding_window_view(xh, (k, k), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, k * k * c)
    wmat = weight.data.transpose(0, 2, 3, 1).reshape(o, k * k * c)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2))
    hp, wp = xh.shape[1], xh.shape[2]

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = None
        if weight.requires_grad:
            dw = np.ascontiguousarray((gm.T @ cols).reshape(o, k, k, c).transpose(0, 3, 1, 2))
        db = gm.sum(axis=0) if bias is not None and bias.requires_grad else None
        dx = None
        if x.requires_grad:
            dcols = (gm @ wmat).reshape(n, ho, wo, k, k, c)
            dxh = np.zeros((n, hp, wp, c), dtype=g.dtype)
            he = stride * (ho - 1) + 1
            we = stride * (wo - 1) + 1
            for i in range(k):
                for j in range(k):
                    dxh[:, i:i + he:stride, j:j + we:stride, :] += dcols[:, :, :, i, j, :]
            dx = np.ascontiguousarray(dxh[:, padding:padding + h, padding:padding + w, :].transpose(0, 3, 1, 2))
        return dx, dw, db

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out, parents, backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``out[n, g] = sum_f x[n, f] * weight[g, f] + bias[g]``."""
    x = as_tensor(x)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense input shape {x.shape} incompatible with weight shape {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out += bias.data

    def backward(g):
        dx = g @ wd if x.requires_grad else None
        dw = g.T @ xd if weight.requires_grad else None
        db = g.sum(axis=0) if bias is not None else None
        return dx, dw, db

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out, parents, backward)


def batch_norm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalisation; running statistics are updated in place when training."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    m = n * h * w
    if training:
        if m < 2:
            raise ShapeError(f"batch_norm2d in training mode needs N*H*W >= 2, got input shape {x.shape}")
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        mean = running_mean.astype(x.dtype, copy=False)
        var = running_var.astype(x.dtype, copy=False)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    gd = gamma.data
    out = xhat * gd[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * gd[None, :, None, None]
        if training:
            s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
            s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
            dx = (inv_std[None, :, None, None] / m) * (m * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv_std[None, :, None, None]
        return dx, dgamma, dbeta

    return Tensor._make(out, (x, gamma, beta), backward)


def relu(x: Tensor) -> Tensor:
    d = x.data
    mask = d > 0
    return Tensor._make(d * mask, (x,), lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    d = x.data
    scale = np.where(d > 0, 1.0, slope).astype(d.dtype)
    return Tensor._make(d * scale, (x,), lambda g: (g * scale,))


def prelu(x: Tensor, a: Tensor) -> Tensor:
    """Parametric ReLU with a single learnable slope ``a`` (shape ``(1,)``)."""
    d = x.data
    pos = d > 0
    ad = a.data.reshape(())
    out = np.where(pos, d, ad * d)

    def backward(g):
        dx = np.where(pos, g, ad * g)
        da = np.asarray(np.where(pos, 0, d * g).sum(), dtype=a.dtype).reshape(a.shape)
        return dx, da

    return Tensor._make(out, (x, a), backward)


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor._make(out, (x,), lambda g: (g * out * (1.0 - out),))


def global_avg_pool2d(x: Tensor) -> Tensor:
    """Adaptive average pooling to 1x1, returned flattened to ``(N, C)``."""
    n, c, h, w = x.shape
    inv = 1.0 / (h * w)
    return Tensor._make(
        x.data.mean(axis=(2, 3)),
        (x,),
        lambda g: (np.broadcast_to(g[:, :, None, None] * inv, x.shape).astype(g.dtype),),
    )
