"""Minimal differentiable-computation substrate."""

from . import functional
from .checkpoint import ParameterStore, load_checkpoint, save_checkpoint
from .layers import (BatchNorm2d, Conv2d, Dense, LeakyReLU, Module, Parameter, PReLU, ReLU,
                     Sequential)
from .optim import AdamState, adam_step
from .tensor import (Tensor, as_tensor, default_dtype, float64_mode, grad_enabled, no_grad,
                     precision)

__all__ = [
    "AdamState", "BatchNorm2d", "Conv2d", "Dense", "LeakyReLU", "Module", "PReLU", "Parameter",
    "ParameterStore", "ReLU", "Sequential", "Tensor", "adam_step", "as_tensor", "default_dtype",
    "float64_mode", "functional", "grad_enabled", "load_checkpoint", "no_grad", "precision",
    "save_checkpoint",
]
