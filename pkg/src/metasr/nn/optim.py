"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import MissingGradientError
from .checkpoint import ParameterStore
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def to_store(self, prefix: str) -> ParameterStore:
        store = ParameterStore()
        store[f"{prefix}step_count"] = np.array(self.step_count, dtype=np.float32)
        for name in self.m:
            store[f"{prefix}m.{name}"] = Tensor(self.m[name], dtype=np.float32)
            store[f"{prefix}v.{name}"] = Tensor(self.v[name], dtype=np.float32)
        return store

    def load_store(self, store: ParameterStore, prefix: str, dtype=np.float32) -> None:
        self.step_count = int(store[f"{prefix}step_count"].item())
        self.m.clear()
        self.v.clear()
        for key in store:
            if key.startswith(f"{prefix}m."):
                name = key[len(prefix) + 2:]
                self.m[name] = store[key].data.astype(dtype)
                self.v[name] = store[f"{prefix}v.{name}"].data.astype(dtype)


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """Apply one Adam update in place to every tensor in ``params`` using its ``.grad``."""
    for name, p in params.items():
        if p.grad is None:
            raise MissingGradientError(name)
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
