"""A small reverse-mode autodiff engine over numpy arrays.

Only the operations the Conv-GRU network needs are provided. Activations are
``(channels, height, width)`` arrays; convolution is zero-padded "same"
cross-correlation. Gradients always *add* into ``Parameter.grad`` so several
backward passes (one per chunk) accumulate until the optimizer consumes them.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError, StateError

BCE_EPS = 1e-7

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Run operations without recording a graph (inference)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "_parents", "_backward", "_cols", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward: Optional[Callable] = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self._parents = tuple(parents)
        self._backward = backward
        self._cols = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    __slots__ = ("grad", "frozen", "name")

    def __init__(self, data, name: str = "", frozen: bool = False, dtype=None):
        super().__init__(data, dtype=dtype)
        self.data = np.ascontiguousarray(self.data)
        self.grad = np.zeros_like(self.data)
        self.frozen = frozen
        self.name = name

    @property
    def requires_grad(self):
        return not self.frozen

    @requires_grad.setter
    def requires_grad(self, value):
        pass

    def zero_grad(self):
        self.grad[...] = 0


def _result(data, parents, backward) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward)
    return Tensor(data)


def _same_shape(*ts):
    shape = ts[0].shape
    for t in ts[1:]:
        if t.shape != shape:
            raise ShapeError(f"operand shapes differ: {shape} vs {t.shape}")


def _im2col(x: Tensor, k: int) -> np.ndarray:
    """(Cin*k*k, H*W) patch matrix, cached on the tensor for reuse across gates."""
    if x._cols is not None and x._cols[0] == k:
        return x._cols[1]
    c, h, w = x.shape
    if k == 1:
        cols = x.data.reshape(c, h * w)
    else:
        p = k // 2
        xp = np.pad(x.data, ((0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (k, k), axis=(1, 2))  # c, h, w, k, k
        cols = np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(c * k * k, h * w)
    if not isinstance(x, Parameter):  # parameter data is mutated in place by optimizers
        x._cols = (k, cols)
    return cols


def conv2d_same(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Zero-padded same-size cross-correlation plus per-channel bias."""
    if x.data.ndim != 3 or kernel.data.ndim != 4:
        raise ShapeError(f"conv2d_same expects (C,H,W) input and (Co,Ci,k,k) kernel, got {x.shape}, {kernel.shape}")
    cout, cin, k, k2 = kernel.shape
    c, h, w = x.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"kernel must be square with odd size, got {k}x{k2}")
    if c != cin:
        raise ShapeError(f"input has {c} channels, kernel expects {cin}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} != ({cout},)")
    cols = _im2col(x, k)
    wmat = kernel.data.reshape(cout, -1)
    out = wmat @ cols
    if bias is not None:
        out += bias.data[:, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        g2 = g.reshape(cout, h * w)
        gk = (g2 @ cols.T).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            dcols = wmat.T @ g2
            if k == 1:
                gx = dcols.reshape(c, h, w)
            else:
                p = k // 2
                dcols = dcols.reshape(c, k, k, h, w)
                gxp = np.zeros((c, h + 2 * p, w + 2 * p), dtype=g.dtype)
                for i in range(k):
                    for j in range(k):
                        gxp[:, i:i + h, j:j + w] += dcols[:, i, j]
                gx = gxp[:, p:p + h, p:p + w]
        if bias is None:
            return gx, gk
        return gx, gk, (g2.sum(axis=1) if bias.requires_grad else None)

    return _result(out.reshape(cout, h, w), parents, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def add3(a: Tensor, b: Tensor, c: Tensor) -> Tensor:
    _same_shape(a, b, c)
    return _result(a.data + b.data + c.data, (a, b, c), lambda g: (g, g, g))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b)
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def sigmoid(x: Tensor) -> Tensor:
    # tanh form avoids overflow for large |x|
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),))


def affine_blend(z: Tensor, prev: Tensor, cand: Tensor) -> Tensor:
    """(1 - z) * prev + z * cand."""
    _same_shape(z, prev, cand)
    zd, pd, cd = z.data, prev.data, cand.data
    out = (1.0 - zd) * pd + zd * cd

    def backward(g):
        return g * (cd - pd), g * (1.0 - zd), g * zd

    return _result(out, (z, prev, cand), backward)


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 stride-2 max pooling; odd edges pool over partial windows."""
    c, h, w = x.shape
    h2, w2 = -(-h // 2), -(-w // 2)
    xp = x.data
    if (h2 * 2, w2 * 2) != (h, w):
        xp = np.pad(xp, ((0, 0), (0, h2 * 2 - h), (0, w2 * 2 - w)), constant_values=-np.inf)
    win = xp.reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gw = np.zeros((c, h2, w2, 4), dtype=g.dtype)
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        gx = gw.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2 * 2, w2 * 2)
        return (gx[:, :h, :w],)

    return _result(out, (x,), backward)


def adaptive_avg_pool_1x1(x: Tensor) -> Tensor:
    c, h, w = x.shape
    out = x.data.mean(axis=(1, 2), keepdims=True)
    scale = 1.0 / (h * w)
    return _result(out, (x,), lambda g: (np.broadcast_to(g * scale, (c, h, w)),))


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def bce_loss(pred: Tensor, target) -> Tensor:
    """Mean binary cross entropy; predictions are clamped to [eps, 1 - eps]."""
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.dtype)
    if t.shape != pred.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {t.shape}")
    p = np.clip(pred.data, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    loss = -np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    inside = (pred.data >= BCE_EPS) & (pred.data <= 1.0 - BCE_EPS)

    def backward(g):
        return (g * inside * (p - t) / (p * (1.0 - p)) / n,)

    return _result(np.asarray(loss, dtype=pred.dtype), (pred,), backward)


def scale(x: Tensor, factor: float) -> Tensor:
    return _result(x.data * factor, (x,), lambda g: (g * factor,))


def tensor_sum(x: Tensor) -> Tensor:
    shape = x.shape
    return _result(np.asarray(x.data.sum(), dtype=x.dtype), (x,), lambda g: (np.broadcast_to(g, shape),))


def _topological(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, grad_scale: float = 1.0):
    """Back-propagate a scalar and add the result into parameter gradients.

    The recorded graph is released afterwards, so each forward pass supports
    exactly one backward call.
    """
    if isinstance(loss, Parameter) or loss._backward is None:
        raise StateError("backward() needs a loss produced by a recorded forward pass")
    if loss.data.size != 1:
        raise ShapeError("backward() expects a scalar loss")
    order = _topological(loss)
    grads = {id(loss): np.full(loss.shape, grad_scale, dtype=loss.dtype)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.grad += g
            continue
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    for node in order:
        if not isinstance(node, Parameter):
            node._parents = ()
            node._backward = None
            node._cols = None


def zero_grad(params: Iterable[Parameter]):
    for p in params:
        p.zero_grad()


class Adam:
    """Adam with bias correction; ``step`` zeroes gradients afterwards."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.frozen:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= update.astype(p.data.dtype, copy=False)
        zero_grad(self.params)
