"""Module containers and the layer types used by the networks."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ..errors import ShapeError
from . import functional as F
from .checkpoint import ParameterStore
from .tensor import Tensor, default_dtype


class Parameter(Tensor):
    """A trainable leaf tensor owned by a module."""

    __slots__ = ()

    def __init__(self, data, requires_grad: bool = True):
        super().__init__(data, requires_grad=requires_grad)


def kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self) -> Iterator[tuple[str, object]]:
        for key in sorted(vars(self)):
            yield key, getattr(self, key)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in self._children():
            if isinstance(value, Parameter):
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{key}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, value in self._children():
            if key in getattr(self, "_buffer_names", ()):
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{key}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable(self) -> dict[str, Parameter]:
        return {name: p for name, p in self.named_parameters() if p.requires_grad}

    def num_trainable(self) -> int:
        return sum(p.data.size for p in self.trainable().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = False
        return self

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self, prefix: str = "") -> ParameterStore:
        store = ParameterStore()
        for name, p in self.named_parameters(prefix):
            store[name] = Tensor(p.data, dtype=p.data.dtype)
        for name, b in self.named_buffers(prefix):
            store[name] = Tensor(b, dtype=b.dtype)
        return store

    def load_state_dict(self, store: ParameterStore, prefix: str = "") -> None:
        """Copy values from ``store`` in place; every parameter and buffer must be present."""
        for name, p in self.named_parameters(prefix):
            p.data[...] = _lookup(store, name, p.shape)
        for name, b in self.named_buffers(prefix):
            b[...] = _lookup(store, name, b.shape)


def _lookup(store: ParameterStore, name: str, shape: tuple[int, ...]) -> np.ndarray:
    if name not in store:
        raise KeyError(f"checkpoint has no entry {name!r}")
    value = store[name].data
    if value.shape != shape:
        raise ShapeError(f"checkpoint entry {name!r} has shape {value.shape}, expected {shape}")
    return value


class Sequential(Module):
    def __init__(self, *layers: Module):
        for i, layer in enumerate(layers):
            setattr(self, str(i), layer)
        self._n = len(layers)

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> Module:
        return getattr(self, str(i))

    def __iter__(self):
        return (self[i] for i in range(self._n))

    def forward(self, x):
        for layer in self:
            x = layer(x)
        return x


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel_size: int, rng: np.random.Generator,
                 stride: int = 1, padding: int | None = None):
        fan_in = in_ch * kernel_size * kernel_size
        self.weight = Parameter(kaiming_uniform(rng, (out_ch, in_ch, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(np.zeros(out_ch))
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        self.weight = Parameter(kaiming_uniform(rng, (out_features, in_features), in_features))
        self.bias = Parameter(np.zeros(out_features))

    def forward(self, x):
        return F.dense(x, self.weight, self.bias)


class BatchNorm2d(Module):
    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels, dtype=default_dtype())
        self.running_var = np.ones(channels, dtype=default_dtype())
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return F.batch_norm2d(x, self.gamma, self.beta, self.running_mean, self.running_var,
                              self.training, self.momentum, self.eps)


class PReLU(Module):
    def __init__(self, init: float = 0.25):
        self.slope = Parameter(np.full(1, init))

    def forward(self, x):
        return F.prelu(x, self.slope)


class ReLU(Module):
    def forward(self, x):
        return F.relu(x)


class LeakyReLU(Module):
    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x):
        return F.leaky_relu(x, self.slope)
