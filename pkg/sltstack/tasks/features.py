"""
Pseudo-Speech Features
Synthesizes per-token acoustic frames and normalizes them per sequence
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from .vocabulary import TokenSequence

# Prototypes depend only on (PROTOTYPE_SEED, token id), never on the utterance seed
PROTOTYPE_SEED = 20200901
VARIANCE_FLOOR = 1e-12


class FeatureConfig(BaseModel):
    feature_dim: int = Field(40, ge=1)
    frames_per_token: int = Field(4, ge=1)
    noise_sd: float = Field(0.1, ge=0.0)


@dataclass(frozen=True)
class FeatureSequence:
    """T x F frame matrix with finite entries and T >= 1"""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError(f"features must be a non-empty T x F matrix, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("features contain non-finite values")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.frames.shape[1]


class FeatureSynthesizer:
    def __init__(self, config: Optional[FeatureConfig] = None):
        self.config = config or FeatureConfig()
        self._prototypes = {}

    def prototype(self, token_id: int) -> np.ndarray:
        """Fixed mean frame of a token"""
        if token_id not in self._prototypes:
            rng = np.random.default_rng([PROTOTYPE_SEED, int(token_id)])
            self._prototypes[token_id] = rng.standard_normal(self.config.feature_dim)
        return self._prototypes[token_id]

    def synthesize(self, tokens: TokenSequence, seed: Union[int, Sequence[int]]) -> FeatureSequence:
        """
        Frames for a token sequence

        Each token (eos excluded) contributes ``frames_per_token`` frames of
        its prototype plus gaussian noise, so frames align monotonically
        with tokens.

        Args:
            tokens: Source tokens
            seed: Noise seed for this utterance

        Returns:
            FeatureSequence: (len * frames_per_token) x feature_dim frames
        """
        ids = tokens.without_eos()
        if not ids:
            raise ValueError("cannot synthesize features for an empty token sequence")
        cfg = self.config
        means = np.repeat(np.stack([self.prototype(i) for i in ids]), cfg.frames_per_token, axis=0)
        noise = np.random.default_rng(seed).standard_normal(means.shape) * cfg.noise_sd
        return FeatureSequence(means + noise)


def synth_features(
    source_tokens: TokenSequence,
    seed: int,
    frames_per_token: int = 4,
    noise_sd: float = 0.1,
    feature_dim: int = 40,
) -> FeatureSequence:
    config = FeatureConfig(feature_dim=feature_dim, frames_per_token=frames_per_token, noise_sd=noise_sd)
    return FeatureSynthesizer(config).synthesize(source_tokens, seed)


def cmvn(features: FeatureSequence) -> FeatureSequence:
    """
    Per-sequence cepstral mean and variance normalization

    Dimensions with zero variance are only mean-centred.

    Args:
        features: Sequence with at least two frames

    Returns:
        FeatureSequence: per-dimension mean 0 and variance 1
    """
    if features.num_frames < 2:
        raise ValueError(f"cmvn needs at least 2 frames, got {features.num_frames}")
    x = features.frames.astype(np.float64)
    centred = x - x.mean(axis=0)
    std = np.sqrt(centred.var(axis=0))
    constant = std <= VARIANCE_FLOOR
    centred[:, constant] = 0.0
    return FeatureSequence(centred / np.where(constant, 1.0, std))
