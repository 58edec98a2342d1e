"""
Gradient Checking
Central finite-difference oracle for autodiff gradients
"""

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_gradient(loss_fn: Callable[[], Tensor], tensor: Tensor, index, h: float) -> float:
    original = tensor.data[index]
    tensor.data[index] = original + h
    plus = float(loss_fn().item())
    tensor.data[index] = original - h
    minus = float(loss_fn().item())
    tensor.data[index] = original
    return (plus - minus) / (2.0 * h)


def gradient_check(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-4,
    rtol: float = 1e-3,
    atol: float = 1e-6,
) -> float:
    """
    Compare autodiff gradients with central finite differences

    Entries that disagree at ``h`` are re-measured at ``h / 100``: a ReLU
    pre-activation lying within ``h`` of zero makes the wide difference
    straddle the kink.

    Args:
        loss_fn: Recomputes the scalar loss from the current tensor values
        tensors: Leaves to check (must have ``requires_grad``)
        h: Finite-difference step
        rtol: Relative tolerance
        atol: Entries where both gradients are below this count as equal

    Returns:
        float: worst relative error over every checked entry
    """
    for tensor in tensors:
        tensor.grad = None
    loss_fn().backward()

    worst = 0.0
    for tensor in tensors:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        for index in np.ndindex(tensor.shape):
            a = float(analytic[index])
            n = numerical_gradient(loss_fn, tensor, index, h)
            error = _relative_error(a, n, atol)
            if error > rtol:
                error = min(error, _relative_error(a, numerical_gradient(loss_fn, tensor, index, h / 100.0), atol))
            worst = max(worst, error)
    return worst


def _relative_error(a: float, n: float, atol: float) -> float:
    diff = abs(a - n)
    if diff <= atol:
        return 0.0
    return diff / max(abs(a), abs(n))
