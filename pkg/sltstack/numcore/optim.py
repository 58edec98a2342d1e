"""
Optimisation
ADAM updates, the warmup learning-rate schedule and gradient clipping
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np
from pydantic import BaseModel, Field

from ..errors import ShapeError
from .tensor import Tensor

logger = logging.getLogger(__name__)


class ScheduleConfig(BaseModel):
    """Warmup-then-decay schedule parameters"""

    k: float = Field(1.0, gt=0)
    d_model: int = Field(256, ge=1)
    warmup: int = Field(25000, ge=1)


def noam_lrate(step: int, cfg: ScheduleConfig) -> float:
    """
    Learning rate at a global step

    lrate = k * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)

    Args:
        step: 1-based global step
        cfg: Schedule parameters

    Returns:
        float: the learning rate, peaking at ``step == cfg.warmup``
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    return cfg.k * cfg.d_model ** -0.5 * min(step ** -0.5, step * cfg.warmup ** -1.5)


@dataclass
class AdamState:
    """Per-parameter moments plus the shared step counter"""

    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-9
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lrate: float,
) -> bool:
    """
    Apply one bias-corrected ADAM step in place

    Parameters whose gradient is identically zero are left untouched
    (moments included), so frozen or unused parameters never drift.

    Args:
        params: Parameters to update, keyed by name
        grads: Gradients keyed like ``params``
        state: Optimizer state; ``state.step`` advances by one
        lrate: Non-negative learning rate

    Returns:
        bool: False if the step was rejected because a gradient was not finite
    """
    if lrate < 0:
        raise ValueError(f"learning rate must be non-negative, got {lrate}")
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise ShapeError(f"adam_update[{name}]", params[name].shape, grad.shape)
    bad = [name for name, grad in grads.items() if not np.all(np.isfinite(grad))]
    if bad:
        logger.warning("Rejected ADAM step %d: non-finite gradient in %s", state.step + 1, ", ".join(bad))
        return False

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        if not np.any(grad):
            continue
        param = params[name]
        g = grad.astype(np.float64)
        m = state.m.get(name, np.zeros(param.shape))
        v = state.v.get(name, np.zeros(param.shape))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        update = lrate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        param.data = (param.data - update).astype(param.data.dtype)
    return True


def grad_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale gradients so their global L2 norm is at most ``max_norm``; returns the norm before clipping"""
    norm = grad_norm(grads)
    if norm > max_norm > 0:
        factor = max_norm / norm
        for name in grads:
            grads[name] = (grads[name] * factor).astype(grads[name].dtype)
    return norm
