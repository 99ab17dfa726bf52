"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Just enough ops for a small causal transformer: broadcast arithmetic,
matmul, reshape/transpose, row gather, reductions, exp/log/tanh/pow.
Gradients are accumulated through a topologically sorted tape. A module
level switch (`no_grad`) turns tape recording off for inference paths.
"""

from __future__ import annotations

import contextlib
from typing import Callable

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad and _grad_enabled
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from a scalar output."""
        assert self.data.size == 1, "backward() requires a scalar"
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        other = as_tensor(other)
        out_data = self.data + other.data
        rg = self.requires_grad or other.requires_grad

        def backward(grad):
            if self.requires_grad:
                self._accumulate(_unbroadcast(grad, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(grad, other.data.shape))

        return Tensor(out_data, rg, (self, other), backward)

    def __mul__(self, other: "Tensor") -> "Tensor":
        other = as_tensor(other)
        out_data = self.data * other.data
        rg = self.requires_grad or other.requires_grad

        def backward(grad):
            if self.requires_grad:
                self._accumulate(_unbroadcast(grad * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(grad * self.data, other.data.shape))

        return Tensor(out_data, rg, (self, other), backward)

    def __neg__(self) -> "Tensor":
        def backward(grad):
            self._accumulate(-grad)

        return Tensor(-self.data, self.requires_grad, (self,), backward)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return self + (-as_tensor(other))

    def __truediv__(self, other: "Tensor") -> "Tensor":
        other = as_tensor(other)
        out_data = self.data / other.data
        rg = self.requires_grad or other.requires_grad

        def backward(grad):
            if self.requires_grad:
                self._accumulate(_unbroadcast(grad / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-grad * self.data / (other.data * other.data), other.data.shape)
                )

        return Tensor(out_data, rg, (self, other), backward)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        other = as_tensor(other)
        out_data = self.data @ other.data
        rg = self.requires_grad or other.requires_grad

        def backward(grad):
            if self.requires_grad:
                g = grad @ np.swapaxes(other.data, -1, -2)
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                g = np.swapaxes(self.data, -1, -2) @ grad
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor(out_data, rg, (self, other), backward)

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape: int) -> "Tensor":
        def backward(grad):
            self._accumulate(grad.reshape(self.data.shape))

        return Tensor(self.data.reshape(shape), self.requires_grad, (self,), backward)

    def transpose(self, *axes: int) -> "Tensor":
        inverse = np.argsort(axes)

        def backward(grad):
            self._accumulate(grad.transpose(inverse))

        return Tensor(self.data.transpose(axes), self.requires_grad, (self,), backward)

    def broadcast_to(self, shape: tuple[int, ...]) -> "Tensor":
        def backward(grad):
            self._accumulate(_unbroadcast(grad, self.data.shape))

        return Tensor(
            np.broadcast_to(self.data, shape).copy(), self.requires_grad, (self,), backward
        )

    def take_rows(self, idx: np.ndarray) -> "Tensor":
        """Index select along axis 0 (embedding lookup); grad scatter-adds."""
        idx = np.asarray(idx)

        def backward(grad):
            full = np.zeros_like(self.data)
            np.add.at(full, idx.reshape(-1), grad.reshape(-1, self.data.shape[-1]))
            self._accumulate(full)

        return Tensor(self.data[idx], self.requires_grad, (self,), backward)

    def gather_last(self, idx: np.ndarray) -> "Tensor":
        """Pick one entry along the last axis per leading position."""
        idx = np.asarray(idx)
        expanded = np.expand_dims(idx, -1)
        out_data = np.take_along_axis(self.data, expanded, axis=-1)[..., 0]

        def backward(grad):
            full = np.zeros_like(self.data)
            np.put_along_axis(full, expanded, np.expand_dims(grad, -1), axis=-1)
            self._accumulate(full)

        return Tensor(out_data, self.requires_grad, (self,), backward)

    # -- elementwise / reductions ---------------------------------------------

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(grad):
            self._accumulate(grad * out_data)

        return Tensor(out_data, self.requires_grad, (self,), backward)

    def log(self) -> "Tensor":
        def backward(grad):
            self._accumulate(grad / self.data)

        return Tensor(np.log(self.data), self.requires_grad, (self,), backward)

    def tanh(self) -> "Tensor":
        out_data = np.tanh(self.data)

        def backward(grad):
            self._accumulate(grad * (1.0 - out_data * out_data))

        return Tensor(out_data, self.requires_grad, (self,), backward)

    def pow_const(self, exponent: float) -> "Tensor":
        def backward(grad):
            self._accumulate(grad * exponent * self.data ** (exponent - 1.0))

        return Tensor(self.data**exponent, self.requires_grad, (self,), backward)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(grad):
            g = grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return Tensor(out_data, self.requires_grad, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    __radd__ = __add__
    __rmul__ = __mul__


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    rg = any(t.requires_grad for t in tensors)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                slicer = [slice(None)] * grad.ndim
                slicer[axis] = slice(lo, hi)
                t._accumulate(grad[tuple(slicer)])

    return Tensor(out_data, rg, tuple(tensors), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x + Tensor(-x.data.max(axis=axis, keepdims=True))  # detached shift
    e = shifted.exp()
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x + Tensor(-x.data.max(axis=axis, keepdims=True))
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + Tensor(eps)).pow_const(-0.5)
    return centered * inv * gain + bias


def gelu(x: Tensor) -> Tensor:
    # tanh approximation; exact derivative via the graph
    c = 0.7978845608028654  # sqrt(2/pi)
    inner = (x + x.pow_const(3.0) * 0.044715) * c
    return x * 0.5 * (inner.tanh() + 1.0)


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over positions where mask is 1.

    logits: (..., V); targets/mask: (...) integer / 0-1 arrays.
    """
    ls = log_softmax(logits, axis=-1)
    nll = -ls.gather_last(targets)
    weight = mask.astype(np.float64)
    total = float(weight.sum())
    return (nll * Tensor(weight)).sum() * (1.0 / total)


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place if their joint L2 norm exceeds max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


class AdamW:
    """Decoupled weight-decay Adam over a dict of named Tensors."""

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 3e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.betas
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for key, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[key] = b1 * self.m[key] + (1.0 - b1) * grad
            self.v[key] = b2 * self.v[key] + (1.0 - b2) * grad * grad
            m_hat = self.m[key] / bias1
            v_hat = self.v[key] / bias2
            p.data -= lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
