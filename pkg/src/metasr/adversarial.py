"""Discriminator, perceptual feature extractor and the generator/discriminator losses."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .nn import Conv2d, Dense, Module, ParameterStore, Sequential, Tensor, load_checkpoint
from .nn import functional as F
from .nn.tensor import absolute, as_tensor, clip, concat, log, square

LOG_EPS = 1e-7
LEAKY_SLOPE = 0.2
MIN_DISCRIMINATOR_SIZE = 16
PERCEPTUAL_SEED = 1234

# (out_channels, stride) after the first conv
_DISC_SCHEDULE = ((64, 2), (128, 1), (128, 2), (256, 1), (256, 2), (512, 1), (512, 2))


@dataclass(frozen=True)
class LossWeights:
    l1: float = 1.0
    adversarial: float = 0.001
    perceptual: float = 0.006

    def __post_init__(self):
        if min(self.l1, self.adversarial, self.perceptual) < 0:
            raise ValueError("loss weights must be non-negative")


class Discriminator(Module):
    """Strided conv + leaky ReLU stack, global average pooling, two dense layers, sigmoid."""

    def __init__(self, in_channels: int = 1, seed: int = 1):
        rng = np.random.default_rng(seed)
        layers = [Conv2d(in_channels, 64, 3, rng, stride=1)]
        prev = 64
        for ch, stride in _DISC_SCHEDULE:
            layers.append(Conv2d(prev, ch, 3, rng, stride=stride))
            prev = ch
        self.convs = Sequential(*layers)
        self.fc1 = Dense(prev, 1024, rng)
        self.fc2 = Dense(1024, 1, rng)

    def logits(self, x):
        x = as_tensor(x)
        if x.ndim != 4 or min(x.shape[2:]) < MIN_DISCRIMINATOR_SIZE:
            raise ShapeError(
                f"discriminator needs (N, C, H, W) input with H, W >= {MIN_DISCRIMINATOR_SIZE}, got {x.shape}"
            )
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LEAKY_SLOPE)
        h = F.leaky_relu(self.fc1(F.global_avg_pool2d(x)), LEAKY_SLOPE)
        return self.fc2(h)

    def forward(self, x):
        return F.sigmoid(self.logits(x))


class FeatureExtractor(Module):
    """Frozen conv stack used by the perceptual loss.

    Layers are conv + ReLU except the last, whose pre-activation output is the
    feature map.  Weights are never trained; gradients only pass through.
    """

    def __init__(self, convs: list[Conv2d], tag: str):
        self.layers = Sequential(*convs)
        self.tag = tag
        self.freeze()

    @property
    def in_channels(self) -> int:
        return self.layers[0].weight.shape[1]

    @classmethod
    def random(cls, in_channels: int = 1, seed: int = PERCEPTUAL_SEED) -> "FeatureExtractor":
        rng = np.random.default_rng(seed)
        plan = ((in_channels, 16, 1), (16, 16, 2), (16, 32, 1), (32, 32, 2), (32, 32, 1))
        convs = [Conv2d(i, o, 3, rng, stride=s) for i, o, s in plan]
        return cls(convs, tag=f"random-5layer-seed{seed}")

    @classmethod
    def from_store(cls, store: ParameterStore, tag: str = "external") -> "FeatureExtractor":
        """Build from entries ``features.<i>.weight`` / ``features.<i>.bias`` (stride 1, same padding)."""
        indices = sorted({int(name.split(".")[1]) for name in store if name.startswith("features.")})
        if not indices:
            raise ValueError("perceptual weights contain no 'features.<i>.weight' entries")
        rng = np.random.default_rng(0)
        convs = []
        for i in indices:
            w = store[f"features.{i}.weight"].data
            conv = Conv2d(w.shape[1], w.shape[0], w.shape[2], rng)
            conv.weight.data[...] = w
            if f"features.{i}.bias" in store:
                conv.bias.data[...] = store[f"features.{i}.bias"].data
            convs.append(conv)
        for a, b in zip(convs, convs[1:]):
            if b.weight.shape[1] != a.weight.shape[0]:
                raise ShapeError(f"perceptual layers do not chain: {a.weight.shape} -> {b.weight.shape}")
        return cls(convs, tag=f"{tag}:{len(convs)}layers")

    @classmethod
    def load(cls, path) -> "FeatureExtractor":
        return cls.from_store(load_checkpoint(path), tag=Path(path).name)

    def forward(self, x):
        x = as_tensor(x)
        if x.shape[1] != self.in_channels:
            if x.shape[1] == 1:
                x = concat([x] * self.in_channels, axis=1)
            else:
                raise ShapeError(f"feature extractor expects {self.in_channels} channels, got {x.shape[1]}")
        last = len(self.layers) - 1
        for i, conv in enumerate(self.layers):
            x = conv(x)
            if i != last:
                x = F.relu(x)
        return x


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes differ, {a.shape} vs {b.shape}")


def l1_loss(sr, hr) -> Tensor:
    """Mean absolute error over every element (per-image 1/CHW, averaged over the batch)."""
    sr, hr = as_tensor(sr), as_tensor(hr)
    _same_shape(sr, hr, "l1_loss")
    return absolute(sr - hr).mean()


def _safe_log(p: Tensor) -> Tensor:
    return log(clip(p, LOG_EPS, 1.0 - LOG_EPS))


def discriminator_loss(d_real, d_fake) -> Tensor:
    """``-mean[log D(x)] - mean[log(1 - D(G(z)))]``."""
    d_real, d_fake = as_tensor(d_real), as_tensor(d_fake)
    return -(_safe_log(d_real).mean() + _safe_log(1.0 - d_fake).mean())


def generator_adversarial_loss(d_fake) -> Tensor:
    """Non-saturating generator objective ``-mean[log D(G(z))]``."""
    return -_safe_log(as_tensor(d_fake)).mean()


def adversarial_losses(d_real, d_fake) -> tuple[Tensor, Tensor]:
    """Return ``(gen_loss, disc_loss)``."""
    return generator_adversarial_loss(d_fake), discriminator_loss(d_real, d_fake)


def perceptual_loss(sr, hr, phi) -> Tensor:
    sr, hr = as_tensor(sr), as_tensor(hr)
    _same_shape(sr, hr, "perceptual_loss")
    fs = phi(sr)
    fh = phi(hr.detach())
    _same_shape(fs, fh, "perceptual_loss features")
    return square(fs - fh).mean()


def generator_loss_terms(sr, hr, d_fake, phi, weights: LossWeights = LossWeights()) -> dict[str, Tensor]:
    terms = {
        "l1": l1_loss(sr, hr),
        "adversarial": generator_adversarial_loss(d_fake),
        "perceptual": perceptual_loss(sr, hr, phi),
    }
    terms["total"] = (
        terms["l1"] * weights.l1
        + terms["adversarial"] * weights.adversarial
        + terms["perceptual"] * weights.perceptual
    )
    return terms


def total_generator_loss(sr, hr, d_fake, phi, weights: LossWeights = LossWeights()) -> Tensor:
    return generator_loss_terms(sr, hr, d_fake, phi, weights)["total"]
