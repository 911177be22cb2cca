"""Feature-learning trunk of the generator and the composed SR network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .meta_upscale import MetaUpscale
from .nn import BatchNorm2d, Conv2d, Module, PReLU, ReLU, Sequential

#: Residual-block count that brings generator + weight prediction network
#: closest to 0.561M trainable parameters with a 256-wide WPN (553,601 total).
DEFAULT_RES_BLOCKS = 4


@dataclass
class GeneratorConfig:
    num_features: int = 64
    num_res_blocks: int = DEFAULT_RES_BLOCKS
    kernel_size: int = 3
    head_kernel: int = 9
    in_channels: int = 1
    wpn_hidden: int = 256
    init_seed: int = 0

    def __post_init__(self):
        if self.kernel_size % 2 == 0 or self.head_kernel % 2 == 0:
            raise ValueError("kernel sizes must be odd")
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")


class ResidualBlock(Module):
    """conv-BN-ReLU-conv-BN with an identity skip."""

    def __init__(self, channels: int, kernel_size: int, rng: np.random.Generator):
        self.conv1 = Conv2d(channels, channels, kernel_size, rng)
        self.bn1 = BatchNorm2d(channels)
        self.act = ReLU()
        self.conv2 = Conv2d(channels, channels, kernel_size, rng)
        self.bn2 = BatchNorm2d(channels)

    def forward(self, x):
        h = self.act(self.bn1(self.conv1(x)))
        return x + self.bn2(self.conv2(h))


class Generator(Module):
    def __init__(self, config: GeneratorConfig, rng: np.random.Generator):
        self.config = config
        nf = config.num_features
        self.head = Conv2d(config.in_channels, nf, config.head_kernel, rng)
        self.head_act = PReLU()
        self.blocks = Sequential(*(ResidualBlock(nf, config.kernel_size, rng) for _ in range(config.num_res_blocks)))
        self.post_conv = Conv2d(nf, nf, config.kernel_size, rng)
        self.post_bn = BatchNorm2d(nf)

    def forward(self, x):
        c = self.config
        if x.ndim != 4 or x.shape[1] != c.in_channels:
            raise ShapeError(f"generator expects (N, {c.in_channels}, h, w) input, got {x.shape}")
        if min(x.shape[2:]) < c.head_kernel:
            raise ShapeError(f"input extents {x.shape[2:]} smaller than head kernel {c.head_kernel}")
        skip = self.head_act(self.head(x))
        h = self.blocks(skip)
        return skip + self.post_bn(self.post_conv(h))


class SRNetwork(Module):
    """Generator trunk followed by the meta-upscale stage: the deployable model."""

    def __init__(self, config: GeneratorConfig | None = None):
        config = config or GeneratorConfig()
        rng = np.random.default_rng(config.init_seed)
        self.config = config
        self.generator = Generator(config, rng)
        self.meta_upscale = MetaUpscale(rng, config.wpn_hidden, config.num_features, config.in_channels)

    def forward(self, lr, r):
        return self.meta_upscale(self.generator(lr), r)


def count_parameters(config: GeneratorConfig | None = None) -> int:
    """Trainable scalars in generator + weight prediction network."""
    return SRNetwork(config).num_trainable()


def infer_config(store) -> GeneratorConfig:
    """Recover the architecture from the entry names and shapes of a checkpoint."""
    try:
        head = store["generator.head.weight"].shape
        hidden = store["meta_upscale.wpn.fc1.weight"].shape[0]
    except KeyError as exc:
        raise KeyError(f"checkpoint lacks generator/meta_upscale entries: {exc}") from None
    blocks = {name.split(".")[2] for name in store if name.startswith("generator.blocks.")}
    conv = store["generator.post_conv.weight"].shape
    return GeneratorConfig(
        num_features=head[0],
        num_res_blocks=len(blocks),
        kernel_size=conv[-1],
        head_kernel=head[-1],
        in_channels=head[1],
        wpn_hidden=hidden,
    )
