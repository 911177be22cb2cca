"""Reverse-mode automatic differentiation over numpy arrays.

Every differentiable op records its parents and a closure mapping the output
gradient to one gradient per parent.  ``Tensor.backward`` walks the recorded
graph in reverse topological order and accumulates gradients into leaves.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import sparse

from ..errors import GraphError, ShapeError

_STATE = {"dtype": np.dtype(np.float32), "grad": True}

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def default_dtype() -> np.dtype:
    return _STATE["dtype"]


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily change the dtype used for new tensors and parameters."""
    old = _STATE["dtype"]
    _STATE["dtype"] = np.dtype(dtype)
    try:
        yield
    finally:
        _STATE["dtype"] = old


def float64_mode():
    return precision(np.float64)


def grad_enabled() -> bool:
    return _STATE["grad"]


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    old = _STATE["grad"]
    _STATE["grad"] = False
    try:
        yield
    finally:
        _STATE["grad"] = old


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.array(data, dtype=dtype or default_dtype())
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._consumed = False

    @classmethod
    def _make(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._consumed = False
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- gradient propagation -----------------------------------------
    def backward(self) -> None:
        if self.data.size != 1:
            raise GraphError(f"backward() needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise GraphError("backward() already ran on this graph; rebuild the forward pass first")
        if not self.requires_grad:
            raise GraphError("loss does not depend on any tensor that requires grad")

        order = _topological_order(self)
        pending: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ShapeError(f"gradient shape {pg.shape} does not match tensor shape {parent.shape}")
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg
        for node in order:
            if node._backward is not None:
                node._consumed = True
                node._parents = ()
                node._backward = None
        self._consumed = True

    # -- operators -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        if node._consumed and node is not root:
            raise GraphError("graph contains nodes already released by an earlier backward()")
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementary ops ----------------------------------------------------
def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    sa, sb = a.shape, b.shape
    return Tensor._make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return Tensor._make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        c = b
        return Tensor._make(a.data * c, (a,), lambda g: (g * c,))
    ad, bd = a.data, b.data
    return Tensor._make(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def reciprocal(a: Tensor) -> Tensor:
    out = 1.0 / a.data
    return Tensor._make(out, (a,), lambda g: (-g * out * out,))


def square(a: Tensor) -> Tensor:
    d = a.data
    return Tensor._make(d * d, (a,), lambda g: (2.0 * g * d,))


def absolute(a: Tensor) -> Tensor:
    d = a.data
    return Tensor._make(np.abs(d), (a,), lambda g: (g * np.sign(d),))


def log(a: Tensor) -> Tensor:
    d = a.data
    return Tensor._make(np.log(d), (a,), lambda g: (g / d,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    d = a.data
    return Tensor._make(np.clip(d, lo, hi), (a,), lambda g: (g * ((d >= lo) & (d <= hi)),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul shapes {ad.shape} and {bd.shape} are incompatible")
    return Tensor._make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._make(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return Tensor._make(
        np.concatenate([t.data for t in tensors], axis=axis),
        tuple(tensors),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def take(a: Tensor, index: np.ndarray) -> Tensor:
    """Gather ``a[index]`` along axis 0; repeated indices accumulate on the way back."""
    index = np.asarray(index)
    rows = a.shape[0]

    def backward(g):
        flat_index = index.reshape(-1)
        m = len(flat_index)
        scatter = sparse.csr_matrix(
            (np.ones(m, dtype=g.dtype), (flat_index, np.arange(m))), shape=(rows, m)
        )
        tail = g.shape[index.ndim:]
        out = scatter @ g.reshape(m, -1)
        return (np.asarray(out, dtype=g.dtype).reshape((rows,) + tail),)

    return Tensor._make(a.data[index], (a,), backward)
