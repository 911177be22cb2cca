"""Shared oracles and fixtures-as-functions for the test suite."""

import numpy as np

from metasr.generator import GeneratorConfig, SRNetwork
from metasr.meta_upscale import KERNEL
from metasr.nn import save_checkpoint


def fd_relative_errors(loss_fn, tensors: dict, rng, samples: int = 12, h: float = 1e-5, floor: float = 1e-8):
    """Per-tensor ``||analytic - numeric|| / max(||analytic||, ||numeric||)`` on sampled entries.

    ``loss_fn`` rebuilds the graph and returns a scalar Tensor.  Tensors whose
    sampled gradients are both below ``floor`` in norm report 0.
    """
    for t in tensors.values():
        t.grad = None
    loss_fn().backward()
    analytic = {k: np.zeros_like(t.data) if t.grad is None else t.grad.copy() for k, t in tensors.items()}
    errors = {}
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        idx = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
        num = np.empty(len(idx))
        for n, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + h
            up = loss_fn().item()
            flat[i] = old - h
            down = loss_fn().item()
            flat[i] = old
            num[n] = (up - down) / (2 * h)
        ana = analytic[name].reshape(-1)[idx]
        scale = max(np.linalg.norm(ana), np.linalg.norm(num))
        errors[name] = 0.0 if scale < floor else float(np.linalg.norm(ana - num) / scale)
    return errors


def identity_network(config: GeneratorConfig | None = None) -> SRNetwork:
    """A network whose R=1 output is its (normalised) input, channel by channel.

    Head: centre tap copies input channel c to feature c; PReLU slope 1; every
    residual branch and the post block are silenced through zero BN gains; the
    weight predictor emits a constant centre-tap filter.
    """
    cfg = config or GeneratorConfig(num_res_blocks=1, wpn_hidden=8)
    net = SRNetwork(cfg)
    g = net.generator
    k = cfg.head_kernel
    g.head.weight.data[...] = 0.0
    g.head.bias.data[...] = 0.0
    for c in range(cfg.in_channels):
        g.head.weight.data[c, c, k // 2, k // 2] = 1.0
    g.head_act.slope.data[...] = 1.0
    for block in g.blocks:
        block.bn2.gamma.data[...] = 0.0
        block.bn2.beta.data[...] = 0.0
    g.post_bn.gamma.data[...] = 0.0
    g.post_bn.beta.data[...] = 0.0

    wpn = net.meta_upscale.wpn
    for fc in (wpn.fc1, wpn.fc2, wpn.fc3):
        fc.weight.data[...] = 0.0
    wpn.fc1.bias.data[...] = 1.0
    wpn.fc2.bias.data[...] = 1.0
    filt = np.zeros((cfg.in_channels, cfg.num_features, KERNEL, KERNEL))
    for c in range(cfg.in_channels):
        filt[c, c, 1, 1] = 1.0
    wpn.fc3.bias.data[...] = filt.ravel() / wpn.output_gain
    net.eval()
    return net


def save_model(net: SRNetwork, path) -> None:
    save_checkpoint(net.state_dict(), path)


def conv2d_loop(x, w, b=None, stride=1, padding=0):
    """Direct six-loop cross-correlation."""
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + wd] = x
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for bi in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0 if b is None else float(b[oc])
                    for ic in range(c):
                        for di in range(k):
                            for dj in range(k):
                                acc += xp[bi, ic, i * stride + di, j * stride + dj] * w[oc, ic, di, dj]
                    out[bi, oc, i, j] = acc
    return out
