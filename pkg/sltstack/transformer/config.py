"""
Model Configuration
Architecture hyperparameters for ASR, MT and end-to-end transformer models
"""

from typing import Literal

from pydantic import BaseModel, Field, model_validator


class ModelConfig(BaseModel):
    """Shape of one encoder-decoder transformer"""

    n_enc_layers: int = Field(4, ge=0)
    n_dec_layers: int = Field(2, ge=0)
    d_model: int = Field(64, ge=2)
    d_ff: int = Field(256, ge=1)
    h: int = Field(4, ge=1)
    vocab_src: int = Field(0, ge=0)
    vocab_tgt: int = Field(8, ge=4)
    input_mode: Literal["speech", "text"] = "text"
    feature_dim: int = Field(40, ge=1)
    conv_channels: int = Field(64, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    label_smoothing: float = Field(0.1, ge=0.0, lt=1.0)
    norm_placement: Literal["pre", "post"] = "pre"
    max_positions: int = Field(512, ge=1)

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ModelConfig":
        if self.d_model % self.h != 0:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by h ({self.h})")
        if self.d_model % 2 != 0:
            raise ValueError(f"d_model ({self.d_model}) must be even for positional encoding")
        if self.input_mode == "text" and self.vocab_src < 4:
            raise ValueError("text input needs vocab_src >= 4 (reserved ids 0..3)")
        return self

    @property
    def d_k(self) -> int:
        return self.d_model // self.h

    # Large-corpus presets
    @classmethod
    def full_asr(cls, vocab_tgt: int) -> "ModelConfig":
        return cls(n_enc_layers=12, n_dec_layers=6, d_model=256, d_ff=2048, h=4,
                   vocab_tgt=vocab_tgt, input_mode="speech")

    @classmethod
    def full_mt(cls, vocab_src: int, vocab_tgt: int) -> "ModelConfig":
        return cls(n_enc_layers=6, n_dec_layers=6, d_model=512, d_ff=1024, h=8,
                   vocab_src=vocab_src, vocab_tgt=vocab_tgt, input_mode="text")

    @classmethod
    def full_e2e(cls, vocab_tgt: int) -> "ModelConfig":
        return cls(n_enc_layers=12, n_dec_layers=6, d_model=256, d_ff=2048, h=4,
                   vocab_tgt=vocab_tgt, input_mode="speech")

    # Desk-scale counterparts
    @classmethod
    def desk_asr(cls, vocab_tgt: int) -> "ModelConfig":
        return cls(n_enc_layers=4, n_dec_layers=2, d_model=64, d_ff=256, h=4,
                   vocab_tgt=vocab_tgt, input_mode="speech", conv_channels=16)

    @classmethod
    def desk_mt(cls, vocab_src: int, vocab_tgt: int) -> "ModelConfig":
        return cls(n_enc_layers=2, n_dec_layers=2, d_model=64, d_ff=256, h=4,
                   vocab_src=vocab_src, vocab_tgt=vocab_tgt, input_mode="text")

    @classmethod
    def desk_e2e(cls, vocab_tgt: int) -> "ModelConfig":
        return cls(n_enc_layers=4, n_dec_layers=2, d_model=64, d_ff=256, h=4,
                   vocab_tgt=vocab_tgt, input_mode="speech", conv_channels=16)
