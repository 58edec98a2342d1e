"""
Functional Ops
Normalisers, lookups and convolution used by the transformer, each with its own backward
"""

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from ..errors import ShapeError
from .tensor import Tensor, _unbroadcast, as_tensor


def _check_axis(op: str, x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"{op} (axis {axis} out of range)", x.shape)
    return axis % x.ndim


def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Numerically stable softmax with an optional boolean keep-mask

    Args:
        x: Scores
        axis: Reduction axis
        mask: Boolean array broadcastable to ``x``; False entries get -inf

    Returns:
        Tensor of probabilities along ``axis``
    """
    axis = _check_axis("softmax", x, axis)
    logits = x.data.astype(np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            mask = np.broadcast_to(mask, x.shape)
        except ValueError:
            raise ShapeError("softmax mask", x.shape, mask.shape) from None
        if not mask.any(axis=axis).all():
            raise ValueError("softmax: a row has every position masked")
        logits = np.where(mask, logits, -np.inf)
    probs64 = special.softmax(logits, axis=axis)
    out = probs64.astype(x.data.dtype)

    def backward(g):
        g64 = g.astype(np.float64)
        inner = np.sum(g64 * probs64, axis=axis, keepdims=True)
        return ((probs64 * (g64 - inner)).astype(x.data.dtype),)

    return Tensor._make(out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis("log_softmax", x, axis)
    out64 = special.log_softmax(x.data.astype(np.float64), axis=axis)

    def backward(g):
        g64 = g.astype(np.float64)
        total = np.sum(g64, axis=axis, keepdims=True)
        return ((g64 - np.exp(out64) * total).astype(x.data.dtype),)

    return Tensor._make(out64.astype(x.data.dtype), (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean, unit variance, then scale and shift"""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError("layer_norm", x.shape, gamma.shape, beta.shape)
    x64 = x.data.astype(np.float64)
    mu = x64.mean(axis=-1, keepdims=True)
    var = x64.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x64 - mu) * inv
    out = (xhat * gamma.data + beta.data).astype(x.data.dtype)
    n = x.shape[-1]
    lead = tuple(range(x.ndim - 1))

    def backward(g):
        g64 = g.astype(np.float64)
        dxhat = g64 * gamma.data
        dx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        dgamma = (g64 * xhat).sum(axis=lead)
        dbeta = g64.sum(axis=lead)
        dtype = x.data.dtype
        return dx.astype(dtype), dgamma.astype(dtype), dbeta.astype(dtype)

    return Tensor._make(out, (x, gamma, beta), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup; ``ids`` may have any shape"""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        bad = ids[(ids < 0) | (ids >= table.shape[0])][0]
        raise ValueError(f"unknown token id {int(bad)} for a table of {table.shape[0]} rows")
    out = table.data[ids]

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return Tensor._make(out, (table,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in tensors]) from None
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._make(out, tuple(tensors), backward)


def where(condition: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Pick from ``a`` where ``condition`` holds, else from ``b``"""
    a, b = as_tensor(a), as_tensor(b)
    condition = np.asarray(condition, dtype=bool)
    out = np.where(condition, a.data, b.data)

    def backward(g):
        zero = np.zeros_like(g)
        return _unbroadcast(np.where(condition, g, zero), a.shape), _unbroadcast(np.where(condition, zero, g), b.shape)

    return Tensor._make(out, (a, b), backward)


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0 or no generator is given"""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / x.data.dtype.type(1.0 - rate)
    out = x.data * keep

    def backward(g):
        return (g * keep,)

    return Tensor._make(out, (x,), backward)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 2, padding: int = 1) -> Tensor:
    """
    2-D cross-correlation over (batch, channels, height, width)

    Args:
        x: Input of shape (B, C, H, W)
        weight: Kernels of shape (O, C, k, k)
        bias: Shape (O,)
        stride: Step in both spatial axes
        padding: Zero padding on every spatial border

    Returns:
        Tensor of shape (B, O, H', W') with H' = (H + 2p - k) // stride + 1
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError("conv2d", x.shape, weight.shape)
    k = weight.shape[-1]
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    padded = np.pad(x.data, pad)
    if padded.shape[2] < k or padded.shape[3] < k:
        raise ShapeError("conv2d (input smaller than kernel)", x.shape, weight.shape)
    patches = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = patches.shape[2], patches.shape[3]
    out = np.tensordot(patches, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = out + bias.data[None, :, None, None]

    def backward(g):
        grad_w = np.tensordot(g, patches, axes=([0, 2, 3], [0, 2, 3]))
        grad_b = g.sum(axis=(0, 2, 3))
        grad_padded = np.zeros_like(padded)
        for i in range(k):
            for j in range(k):
                contrib = np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                grad_padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += contrib
        h, w = x.shape[2], x.shape[3]
        grad_x = grad_padded[:, :, padding:padding + h, padding:padding + w]
        return grad_x, grad_w.astype(weight.data.dtype), grad_b

    return Tensor._make(np.ascontiguousarray(out), (x, weight, bias), backward)
