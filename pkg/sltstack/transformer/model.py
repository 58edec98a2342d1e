"""
Sequence Model
Encoder-decoder transformer for speech or text input
"""

import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import special

from ..errors import ShapeError
from ..numcore.functional import dropout, embedding, layer_norm
from ..numcore.params import ModelParams, glorot_uniform
from ..numcore.tensor import Tensor, as_tensor, no_grad
from ..tasks.vocabulary import SOS_ID
from .config import ModelConfig
from .layers import (
    AttentionParams,
    ConvFrontendParams,
    FfnParams,
    conv_frontend,
    multi_head_attention,
    position_wise_ffn,
    positional_encoding,
)

logger = logging.getLogger(__name__)

# (embedded inputs, embedding table, "enc" | "dec") -> replacement embeddings
AugmentHook = Callable[[Tensor, Tensor, str], Tensor]


class SeqModel:
    """
    Transformer encoder-decoder

    Speech models run features through the convolutional frontend, text
    models through a source embedding; both add positional encodings before
    the encoder stack. The decoder is causal over the target prefix and
    cross-attends to the encoder states.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.params = ModelParams()
        self.pe = positional_encoding(config.max_positions, config.d_model)
        self._dropout_rng: Optional[np.random.Generator] = None
        self._dropout_rate = config.dropout
        self._build(np.random.default_rng(seed))
        logger.debug("Built %s model with %d parameters", config.input_mode, self.num_parameters())

    # *** construction ***
    def _build(self, rng: np.random.Generator) -> None:
        cfg, p = self.config, self.params
        if cfg.input_mode == "speech":
            self.frontend = ConvFrontendParams.create(p, "frontend", cfg.feature_dim, cfg.conv_channels, cfg.d_model, rng)
        else:
            self.frontend = None
            p.add("src_embed", glorot_uniform(rng, cfg.vocab_src, cfg.d_model))

        self.enc_layers: List[Dict] = []
        for i in range(cfg.n_enc_layers):
            prefix = f"enc.{i}"
            self.enc_layers.append({
                "self_attn": AttentionParams.create(p, f"{prefix}.self_attn", cfg.d_model, cfg.h, rng),
                "ffn": FfnParams.create(p, f"{prefix}.ffn", cfg.d_model, cfg.d_ff, rng),
                "ln": [self._add_norm(f"{prefix}.ln{j}") for j in range(2)],
            })

        p.add("tgt_embed", glorot_uniform(rng, cfg.vocab_tgt, cfg.d_model))
        self.dec_layers: List[Dict] = []
        for i in range(cfg.n_dec_layers):
            prefix = f"dec.{i}"
            self.dec_layers.append({
                "self_attn": AttentionParams.create(p, f"{prefix}.self_attn", cfg.d_model, cfg.h, rng),
                "cross_attn": AttentionParams.create(p, f"{prefix}.cross_attn", cfg.d_model, cfg.h, rng),
                "ffn": FfnParams.create(p, f"{prefix}.ffn", cfg.d_model, cfg.d_ff, rng),
                "ln": [self._add_norm(f"{prefix}.ln{j}") for j in range(3)],
            })

        # pre-norm stacks end with one more normalisation; empty stacks pass inputs through
        self.enc_norm = self._add_norm("enc.norm") if cfg.norm_placement == "pre" and cfg.n_enc_layers else None
        self.dec_norm = self._add_norm("dec.norm") if cfg.norm_placement == "pre" and cfg.n_dec_layers else None

        p.add("out.w", glorot_uniform(rng, cfg.d_model, cfg.vocab_tgt))
        p.add("out.b", np.zeros(cfg.vocab_tgt))

    def _add_norm(self, prefix: str) -> Tuple[Tensor, Tensor]:
        d = self.config.d_model
        return self.params.add(f"{prefix}.gamma", np.ones(d)), self.params.add(f"{prefix}.beta", np.zeros(d))

    def num_parameters(self) -> int:
        return self.params.num_parameters()

    # *** training mode ***
    def train(self, rng: np.random.Generator, rate: Optional[float] = None) -> None:
        """Enable dropout at ``rate`` (default: the configured rate), drawing masks from ``rng``"""
        self._dropout_rng = rng
        self._dropout_rate = self.config.dropout if rate is None else rate

    def eval(self) -> None:
        self._dropout_rng = None

    @property
    def training(self) -> bool:
        return self._dropout_rng is not None

    def _dropout(self, x: Tensor) -> Tensor:
        return dropout(x, self._dropout_rate, self._dropout_rng)

    def _sublayer(self, x: Tensor, norm: Tuple[Tensor, Tensor], fn: Callable[[Tensor], Tensor]) -> Tensor:
        if self.config.norm_placement == "pre":
            return x + self._dropout(fn(layer_norm(x, *norm)))
        return layer_norm(x + self._dropout(fn(x)), *norm)

    def _attend(self, x_q: Tensor, x_kv: Tensor, params: AttentionParams, mask: np.ndarray) -> Tensor:
        return multi_head_attention(x_q, x_kv, params, mask, self._dropout_rate, self._dropout_rng)

    def _positions(self, length: int) -> np.ndarray:
        if length > self.pe.shape[0]:
            raise ValueError(f"sequence length {length} exceeds max_positions {self.pe.shape[0]}")
        return self.pe[:length]

    # *** encoder ***
    def encode(
        self,
        inputs: np.ndarray,
        lengths: Optional[np.ndarray] = None,
        augment: Optional[AugmentHook] = None,
    ) -> Tuple[Tensor, np.ndarray]:
        """
        Run the encoder

        Args:
            inputs: (B, T, F) features for speech models, (B, S) token ids for text models
            lengths: (B,) valid lengths; defaults to the full padded length
            augment: Optional hook applied to source embeddings (text models)

        Returns:
            Tuple: encoder states H (B, T', d_model) and the boolean key mask (B, T')
        """
        inputs = np.asarray(inputs)
        if lengths is None:
            lengths = np.full(inputs.shape[0], inputs.shape[1], dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)

        if self.config.input_mode == "speech":
            if inputs.ndim != 3:
                raise ShapeError("encode (speech input must be B x T x F)", inputs.shape)
            x, reduced = conv_frontend(Tensor(inputs), lengths, self.frontend, self.pe)
            mask = np.arange(x.shape[1])[None, :] < reduced[:, None]
            return self._encoder_stack(self._dropout(x), mask), mask

        if inputs.ndim != 2:
            raise ShapeError("encode (text input must be B x S)", inputs.shape)
        table = self.params["src_embed"]
        embedded = embedding(table, inputs)
        if augment is not None:
            embedded = augment(embedded, table, "enc")
        mask = np.arange(inputs.shape[1])[None, :] < lengths[:, None]
        return self.encode_continuous(embedded, mask), mask

    def encode_continuous(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """Encoder over continuous d_model vectors; positional encodings are added here"""
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.config.d_model:
            raise ShapeError("encode_continuous", x.shape, (self.config.d_model,))
        x = x + self._positions(x.shape[1])
        return self._encoder_stack(self._dropout(x), np.asarray(mask, dtype=bool))

    def _encoder_stack(self, x: Tensor, mask: np.ndarray) -> Tensor:
        keep = mask[:, None, :]
        for layer in self.enc_layers:
            ln_attn, ln_ffn = layer["ln"]
            x = self._sublayer(x, ln_attn, lambda y, a=layer["self_attn"]: self._attend(y, y, a, keep))
            x = self._sublayer(x, ln_ffn, lambda y, f=layer["ffn"]: position_wise_ffn(y, f))
        if self.enc_norm is not None:
            x = layer_norm(x, *self.enc_norm)
        return x

    # *** decoder ***
    def decode(
        self,
        memory: Tensor,
        memory_mask: np.ndarray,
        prefix_ids: np.ndarray,
        augment: Optional[AugmentHook] = None,
    ) -> Tuple[Tensor, Tensor]:
        """
        Teacher-forced decoder pass

        Args:
            memory: Encoder states (B, T', d_model)
            memory_mask: Boolean key mask (B, T')
            prefix_ids: (B, L) decoder inputs starting with sos
            augment: Optional hook applied to target embeddings

        Returns:
            Tuple: logits (B, L, vocab_tgt) and final hidden states (B, L, d_model)
        """
        prefix_ids = np.asarray(prefix_ids, dtype=np.int64)
        if prefix_ids.ndim != 2 or prefix_ids.shape[1] == 0:
            raise ValueError(f"decoder prefix must be a non-empty (B, L) array, got shape {prefix_ids.shape}")
        if prefix_ids.shape[0] != memory.shape[0]:
            raise ShapeError("decode (batch)", prefix_ids.shape, memory.shape)

        table = self.params["tgt_embed"]
        y = embedding(table, prefix_ids)
        if augment is not None:
            y = augment(y, table, "dec")
        length = prefix_ids.shape[1]
        y = self._dropout(y + self._positions(length))

        causal = np.tril(np.ones((length, length), dtype=bool))
        cross = np.asarray(memory_mask, dtype=bool)[:, None, :]
        for layer in self.dec_layers:
            ln_self, ln_cross, ln_ffn = layer["ln"]
            y = self._sublayer(y, ln_self, lambda z, a=layer["self_attn"]: self._attend(z, z, a, causal))
            y = self._sublayer(y, ln_cross, lambda z, a=layer["cross_attn"]: self._attend(z, memory, a, cross))
            y = self._sublayer(y, ln_ffn, lambda z, f=layer["ffn"]: position_wise_ffn(z, f))
        if self.dec_norm is not None:
            y = layer_norm(y, *self.dec_norm)
        logits = y @ self.params["out.w"] + self.params["out.b"]
        return logits, y

    def forward(
        self,
        inputs: np.ndarray,
        lengths: Optional[np.ndarray],
        prefix_ids: np.ndarray,
        augment: Optional[AugmentHook] = None,
    ) -> Tuple[Tensor, Tensor]:
        memory, mask = self.encode(inputs, lengths, augment)
        return self.decode(memory, mask, prefix_ids, augment)

    def decode_step(
        self,
        memory: Tensor,
        memory_mask: np.ndarray,
        prefixes: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Next-token distributions for a set of equal-length prefixes

        Args:
            memory: Encoder states of one utterance (1, T', d) or one per prefix (n, T', d)
            memory_mask: Matching key mask
            prefixes: (n, L) token ids, each starting with sos

        Returns:
            Tuple: float64 probabilities (n, vocab_tgt) and last-position hidden states (n, d_model)
        """
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=np.int64))
        if prefixes.shape[1] == 0:
            raise ValueError("decode_step needs a non-empty prefix")
        if np.any(prefixes[:, 0] != SOS_ID):
            raise ValueError("decoder prefixes must begin with the sos token")
        n = prefixes.shape[0]
        memory_mask = np.asarray(memory_mask, dtype=bool)
        with no_grad():
            if memory.shape[0] == 1 and n > 1:
                memory = Tensor(np.repeat(memory.data, n, axis=0))
                memory_mask = np.repeat(memory_mask, n, axis=0)
            logits, hidden = self.decode(memory, memory_mask, prefixes)
        last = logits.data[:, -1, :].astype(np.float64)
        return special.softmax(last, axis=-1), hidden.data[:, -1, :].copy()
