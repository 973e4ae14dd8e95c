"""Differentiable array operations for the transformer and its losses."""
from __future__ import annotations

import numpy as np
from scipy.special import erf

from .core import ShapeError, Tensor, as_tensor, make_node

_RMS_EPS = 1e-6
_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(data, (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_node(data, (a, b), bw)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy stacking semantics on leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ for {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bw(g):
        ga = g @ b.data.swapaxes(-1, -2)
        gb = a.data.swapaxes(-1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(data, (a, b), bw)


def linear(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map on the trailing axis: x @ w (+ bias)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input width {x.shape} does not match weight {w.shape}")
    data = x.data @ w.data
    if bias is not None:
        data = data + bias.data

    def bw(g):
        gx = g @ w.data.T
        g2 = g.reshape(-1, g.shape[-1])
        gw = x.data.reshape(-1, x.shape[-1]).T @ g2
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0).reshape(bias.shape)

    parents = (x, w) if bias is None else (x, w, bias)
    return make_node(data, parents, bw)


def concat(nodes, axis: int) -> Tensor:
    nodes = [as_tensor(n) for n in nodes]
    if not nodes:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([n.data for n in nodes], axis=axis)
    ndim = data.ndim
    slices = []
    start = 0
    for n in nodes:
        idx = [slice(None)] * ndim
        idx[axis] = slice(start, start + n.shape[axis])
        slices.append(tuple(idx))
        start += n.shape[axis]

    def bw(g):
        return tuple(g[idx] for idx in slices)

    return make_node(data, tuple(nodes), bw)


def split(node: Tensor, axis: int, sizes) -> list[Tensor]:
    """Partition ``node`` along ``axis`` into pieces of the given sizes."""
    node = as_tensor(node)
    if sum(sizes) != node.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover {node.shape} axis {axis}")
    outs = []
    start = 0
    for size in sizes:
        idx = [slice(None)] * node.ndim
        idx[axis] = slice(start, start + size)
        idx = tuple(idx)
        piece = node.data[idx]

        def bw(g, idx=idx):
            full = np.zeros(node.shape)
            full[idx] = g
            return (full,)

        outs.append(make_node(piece, (node,), bw))
        start += size
    return outs


def narrow(node: Tensor, axis: int, start: int, length: int) -> Tensor:
    """A single contiguous slice along ``axis``."""
    node = as_tensor(node)
    idx = [slice(None)] * node.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def bw(g):
        full = np.zeros(node.shape)
        full[idx] = g
        return (full,)

    return make_node(node.data[idx], (node,), bw)


def transpose(x: Tensor, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inv = [0] * len(axes)
    for i, a in enumerate(axes):
        inv[a] = i
    inv = tuple(inv)
    return make_node(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, x.shape).copy(),)

    return make_node(data, (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        n = x.size
    elif isinstance(axis, tuple):
        n = int(np.prod([x.shape[a] for a in axis]))
    else:
        n = x.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return make_node(y, (x,), bw)


def rms_norm(x: Tensor, axis: int, gain: Tensor) -> Tensor:
    """Root-mean-square normalization along ``axis`` with learned gain."""
    x, gain = as_tensor(x), as_tensor(gain)
    n = x.shape[axis]
    if gain.size != n:
        raise ShapeError(f"rms_norm gain shape {gain.shape} does not match axis size {n}")
    axis_n = axis % x.ndim
    ms = (x.data * x.data).sum(axis=axis_n, keepdims=True) * (1.0 / n)
    inv = 1.0 / np.sqrt(ms + _RMS_EPS)
    bshape = [1] * x.ndim
    bshape[axis_n] = n
    gain_b = gain.data.reshape(bshape)
    y = x.data * inv * gain_b

    def bw(g):
        gg = g * gain_b
        inner = (gg * x.data).sum(axis=axis_n, keepdims=True)
        gx = inv * gg - x.data * (inv ** 3) * inner / n
        reduce_axes = tuple(i for i in range(x.ndim) if i != axis_n)
        ggain = (g * x.data * inv).sum(axis=reduce_axes).reshape(gain.shape)
        return gx, ggain

    return make_node(y, (x, gain), bw)


def layer_norm(x: Tensor, axis: int, gain: Tensor) -> Tensor:
    """Mean-subtracted normalization along ``axis`` with learned gain."""
    x, gain = as_tensor(x), as_tensor(gain)
    n = x.shape[axis]
    if gain.size != n:
        raise ShapeError(f"layer_norm gain shape {gain.shape} does not match axis size {n}")
    axis_n = axis % x.ndim
    mu = x.data.mean(axis=axis_n, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).sum(axis=axis_n, keepdims=True) * (1.0 / n)
    inv = 1.0 / np.sqrt(var + _RMS_EPS)
    xhat = centered * inv
    bshape = [1] * x.ndim
    bshape[axis_n] = n
    gain_b = gain.data.reshape(bshape)
    y = xhat * gain_b

    def bw(g):
        gg = g * gain_b
        m1 = gg.mean(axis=axis_n, keepdims=True)
        m2 = (gg * xhat).mean(axis=axis_n, keepdims=True)
        gx = inv * (gg - m1 - xhat * m2)
        reduce_axes = tuple(i for i in range(x.ndim) if i != axis_n)
        ggain = (g * xhat).sum(axis=reduce_axes).reshape(gain.shape)
        return gx, ggain

    return make_node(y, (x, gain), bw)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) Gaussian error linear unit."""
    x = as_tensor(x)
    phi = 0.5 * (1.0 + erf(x.data / _SQRT2))
    y = x.data * phi

    def bw(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (phi + x.data * pdf),)

    return make_node(y, (x,), bw)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.data))
    return make_node(s, (x,), lambda g: (g * s * (1.0 - s),))


def silu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.data))
    y = x.data * s

    def bw(g):
        return (g * (s + y * (1.0 - s)),)

    return make_node(y, (x,), bw)


def square(x: Tensor) -> Tensor:
    x = as_tensor(x)
    return make_node(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def sqrt(x: Tensor) -> Tensor:
    x = as_tensor(x)
    root = np.sqrt(x.data)
    return make_node(root, (x,), lambda g: (g * 0.5 / root,))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise ShapeError(f"div: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return make_node(data, (a, b), bw)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over all elements."""
    if pred.shape != as_tensor(target).shape:
        raise ShapeError(f"mse: shapes {pred.shape} and {as_tensor(target).shape} differ")
    return mean(square(sub(pred, target)))
