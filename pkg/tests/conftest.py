"""
Shared fixtures: seeded generators, tiny model configs and small corpora
"""

import numpy as np
import pytest

from sltstack.numcore.tensor import precision
from sltstack.tasks.corpus import CorpusConfig, make_splits
from sltstack.tasks.features import FeatureConfig
from sltstack.transformer.config import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    with precision(np.float64):
        yield


@pytest.fixture
def tiny_text_config():
    return ModelConfig(
        n_enc_layers=1, n_dec_layers=1, d_model=8, d_ff=16, h=2,
        vocab_src=6, vocab_tgt=6, input_mode="text", dropout=0.0,
    )


@pytest.fixture
def tiny_speech_config():
    return ModelConfig(
        n_enc_layers=1, n_dec_layers=1, d_model=8, d_ff=16, h=2,
        vocab_tgt=7, input_mode="speech", feature_dim=6, conv_channels=2, dropout=0.0,
    )


@pytest.fixture
def tiny_corpus_config():
    return CorpusConfig(
        alphabet_size=4, min_len=1, max_len=3, n_train=8, n_dev=4, n_test=4,
        features=FeatureConfig(feature_dim=6, frames_per_token=4, noise_sd=0.1),
    )


@pytest.fixture
def tiny_splits(tiny_corpus_config):
    return make_splits(tiny_corpus_config, seed=7)
