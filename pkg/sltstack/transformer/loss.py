"""
Training Loss
Label-smoothed cross-entropy over non-pad target positions
"""

import numpy as np

from ..errors import ShapeError
from ..numcore.functional import log_softmax
from ..numcore.tensor import Tensor, mul
from ..tasks.vocabulary import PAD_ID


def smoothed_targets(targets: np.ndarray, vocab_size: int, eps: float) -> np.ndarray:
    """q(target) = 1 - eps + eps/V, q(other) = eps/V"""
    q = np.full(targets.shape + (vocab_size,), eps / vocab_size, dtype=np.float64)
    np.put_along_axis(q, targets[..., None], 1.0 - eps + eps / vocab_size, axis=-1)
    return q


def label_smoothed_loss(logits: Tensor, targets: np.ndarray, eps: float = 0.1, pad_id: int = PAD_ID) -> Tensor:
    """
    Cross-entropy against label-smoothed targets, averaged over non-pad positions

    Args:
        logits: (..., V) unnormalised scores
        targets: (...) gold ids; positions equal to ``pad_id`` are ignored
        eps: Smoothing mass in [0, 1)
        pad_id: Padding id

    Returns:
        Tensor: scalar loss
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"label smoothing must lie in [0, 1), got {eps}")
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError("label_smoothed_loss", logits.shape, targets.shape)
    keep = targets != pad_id
    count = int(keep.sum())
    if count == 0:
        raise ValueError("label_smoothed_loss: every target position is padding")

    vocab_size = logits.shape[-1]
    q = smoothed_targets(np.where(keep, targets, 0), vocab_size, eps) * keep[..., None]
    weighted = mul(log_softmax(logits, axis=-1), q.astype(logits.data.dtype))
    return weighted.sum() * (-1.0 / count)
