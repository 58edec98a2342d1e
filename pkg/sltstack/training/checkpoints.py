"""
Checkpoint Averaging
Elementwise mean of epoch checkpoints used for decoding
"""

import logging
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError
from ..numcore.params import ModelParams

logger = logging.getLogger(__name__)


def average_checkpoints(checkpoints: Sequence[Mapping[str, np.ndarray]]) -> ModelParams:
    """
    Arithmetic mean per parameter

    Args:
        checkpoints: Snapshots sharing parameter names and shapes

    Returns:
        ModelParams: float32 means, accumulated in float64

    Raises:
        ConfigError: on a name or shape mismatch
    """
    if not checkpoints:
        raise ValueError("average_checkpoints needs at least one checkpoint")
    names = list(checkpoints[0])
    for index, ckpt in enumerate(checkpoints[1:], start=1):
        if set(ckpt) != set(names):
            diff = sorted(set(ckpt) ^ set(names))
            raise ConfigError(f"checkpoint {index} parameter names differ from checkpoint 0: {diff[:5]}")
        for name in names:
            if ckpt[name].shape != checkpoints[0][name].shape:
                raise ConfigError(
                    f"layer {name}: checkpoint {index} shape {ckpt[name].shape} != {checkpoints[0][name].shape}"
                )

    averaged = ModelParams()
    for name in names:
        stacked = np.stack([np.asarray(ckpt[name], dtype=np.float64) for ckpt in checkpoints])
        averaged.add(name, stacked.mean(axis=0).astype(np.float32))
    logger.info("Averaged %d checkpoints", len(checkpoints))
    return averaged


def average_last(checkpoints: Sequence[Mapping[str, np.ndarray]], count: int) -> ModelParams:
    """Average the final ``count`` checkpoints (all of them if fewer exist)"""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return average_checkpoints(list(checkpoints)[-count:])
