"""
Transformer Layers
Positional encoding, attention, feed-forward and convolutional frontend blocks
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import ShapeError
from ..numcore.functional import conv2d, dropout, softmax
from ..numcore.params import ModelParams, glorot_uniform
from ..numcore.tensor import Tensor, as_tensor, default_dtype, mul, relu, scale, transpose

MIN_FRONTEND_FRAMES = 4


def positional_encoding(max_pos: int, d_model: int) -> np.ndarray:
    """
    Fixed sinusoidal position table in half-split layout

    Column i < d_model/2 holds sin(pos / 10000^(2i/d_model)); column
    i >= d_model/2 holds cos(pos / 10000^(2i/d_model)) with the same
    column index in the exponent.

    Args:
        max_pos: Number of positions (rows)
        d_model: Model width, must be even

    Returns:
        np.ndarray: (max_pos, d_model) table in the default dtype
    """
    if d_model % 2 != 0:
        raise ValueError(f"positional encoding needs an even d_model, got {d_model}")
    half = d_model // 2
    pos = np.arange(max_pos, dtype=np.float64)[:, None]
    columns = np.arange(d_model, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * columns / d_model)
    table = np.empty((max_pos, d_model), dtype=np.float64)
    table[:, :half] = np.sin(angles[:, :half])
    table[:, half:] = np.cos(angles[:, half:])
    return table.astype(default_dtype())


@dataclass
class AttentionParams:
    """Fused per-head projections; head l owns columns l*d_k:(l+1)*d_k of w_q/w_k/w_v"""

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    h: int

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_k(self) -> int:
        return self.d_model // self.h

    @classmethod
    def create(cls, params: ModelParams, prefix: str, d_model: int, h: int, rng: np.random.Generator) -> "AttentionParams":
        if d_model % h != 0:
            raise ValueError(f"d_model ({d_model}) must be divisible by h ({h})")
        return cls(
            w_q=params.add(f"{prefix}.w_q", glorot_uniform(rng, d_model, d_model)),
            w_k=params.add(f"{prefix}.w_k", glorot_uniform(rng, d_model, d_model)),
            w_v=params.add(f"{prefix}.w_v", glorot_uniform(rng, d_model, d_model)),
            w_o=params.add(f"{prefix}.w_o", glorot_uniform(rng, d_model, d_model)),
            h=h,
        )


@dataclass
class FfnParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def create(cls, params: ModelParams, prefix: str, d_model: int, d_ff: int, rng: np.random.Generator) -> "FfnParams":
        return cls(
            w1=params.add(f"{prefix}.w1", glorot_uniform(rng, d_model, d_ff)),
            b1=params.add(f"{prefix}.b1", np.zeros(d_ff)),
            w2=params.add(f"{prefix}.w2", glorot_uniform(rng, d_ff, d_model)),
            b2=params.add(f"{prefix}.b2", np.zeros(d_model)),
        )


@dataclass
class ConvFrontendParams:
    """Two 3x3 stride-2 convolutions and the projection of flattened channels to d_model"""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    w_proj: Tensor
    b_proj: Tensor
    feature_dim: int

    @classmethod
    def create(
        cls,
        params: ModelParams,
        prefix: str,
        feature_dim: int,
        channels: int,
        d_model: int,
        rng: np.random.Generator,
    ) -> "ConvFrontendParams":
        reduced = conv_output_length(conv_output_length(feature_dim))
        return cls(
            w1=params.add(f"{prefix}.conv1.w", glorot_uniform(rng, 9, channels * 9, (channels, 1, 3, 3))),
            b1=params.add(f"{prefix}.conv1.b", np.zeros(channels)),
            w2=params.add(f"{prefix}.conv2.w", glorot_uniform(rng, channels * 9, channels * 9, (channels, channels, 3, 3))),
            b2=params.add(f"{prefix}.conv2.b", np.zeros(channels)),
            w_proj=params.add(f"{prefix}.proj.w", glorot_uniform(rng, channels * reduced, d_model)),
            b_proj=params.add(f"{prefix}.proj.b", np.zeros(d_model)),
            feature_dim=feature_dim,
        )


def conv_output_length(length: int) -> int:
    """Output length of one kernel-3, stride-2, padding-1 convolution: ceil(length / 2)"""
    return (length + 2 - 3) // 2 + 1


def _swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def scaled_dot_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: Optional[np.ndarray] = None,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    return_weights: bool = False,
):
    """
    softmax(Q K^T / sqrt(d_k)) V

    Args:
        q: (..., Tq, d_k)
        k: (..., Tk, d_k)
        v: (..., Tk, d_v)
        mask: Boolean keep-mask broadcastable to (..., Tq, Tk)
        dropout_rate: Dropout on the attention weights (training only)
        rng: Dropout generator; None disables dropout
        return_weights: Also return the attention weight tensor

    Returns:
        Tensor (..., Tq, d_v), or (output, weights) if ``return_weights``
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError("scaled_dot_attention (query/key width)", q.shape, k.shape)
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError("scaled_dot_attention (key/value length)", k.shape, v.shape)
    scores = scale(q @ _swap_last(k), 1.0 / math.sqrt(q.shape[-1]))
    weights = softmax(scores, axis=-1, mask=mask)
    out = dropout(weights, dropout_rate, rng) @ v
    if return_weights:
        return out, weights
    return out


def _split_heads(x: Tensor, h: int) -> Tensor:
    b, t, d = x.shape
    return transpose(x.reshape(b, t, h, d // h), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, t, d_k = x.shape
    return transpose(x, (0, 2, 1, 3)).reshape(b, t, h * d_k)


def multi_head_attention(
    x_q: Tensor,
    x_kv: Tensor,
    params: AttentionParams,
    mask: Optional[np.ndarray] = None,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """
    Concat[head_1 .. head_h] W_O with head_l = Attention(x_q W_l^q, x_kv W_l^k, x_kv W_l^v)

    Inputs are (T, d_model) or (B, T, d_model); masks are (Tq, Tk) or
    (B, Tq, Tk) with broadcastable leading axes, shared by every head.
    """
    x_q, x_kv = as_tensor(x_q), as_tensor(x_kv)
    d_model = params.d_model
    if x_q.shape[-1] != d_model or x_kv.shape[-1] != d_model:
        raise ShapeError("multi_head_attention (model width)", x_q.shape, x_kv.shape, (d_model,))
    unbatched = x_q.ndim == 2
    if unbatched:
        x_q = x_q.reshape(1, *x_q.shape)
        x_kv = x_kv.reshape(1, *x_kv.shape)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        mask = mask[None, None] if mask.ndim == 2 else mask[:, None]

    q = _split_heads(x_q @ params.w_q, params.h)
    k = _split_heads(x_kv @ params.w_k, params.h)
    v = _split_heads(x_kv @ params.w_v, params.h)
    heads = scaled_dot_attention(q, k, v, mask, dropout_rate, rng)
    out = _merge_heads(heads) @ params.w_o
    if unbatched:
        out = out.reshape(out.shape[1:])
    return out


def position_wise_ffn(x: Tensor, p: FfnParams) -> Tensor:
    if x.shape[-1] != p.w1.shape[0]:
        raise ShapeError("position_wise_ffn", x.shape, p.w1.shape)
    return relu(x @ p.w1 + p.b1) @ p.w2 + p.b2


def conv_frontend(
    features: Tensor,
    lengths: np.ndarray,
    p: ConvFrontendParams,
    pe: np.ndarray,
) -> Tuple[Tensor, np.ndarray]:
    """
    Subsample acoustic frames by four and project them to the model width

    Args:
        features: (B, T, F) frames, zero beyond each sequence's length
        lengths: (B,) valid frame counts
        p: Frontend parameters
        pe: Positional table added after the projection

    Returns:
        Tuple: (B, T'', d_model) tensor and the (B,) reduced lengths
    """
    features = as_tensor(features)
    lengths = np.asarray(lengths, dtype=np.int64)
    if features.ndim != 3 or features.shape[-1] != p.feature_dim:
        raise ShapeError("conv_frontend (features)", features.shape, (p.feature_dim,))
    if lengths.shape != (features.shape[0],):
        raise ShapeError("conv_frontend (lengths)", lengths.shape, (features.shape[0],))
    if lengths.min() < MIN_FRONTEND_FRAMES:
        raise ValueError(f"conv frontend needs at least {MIN_FRONTEND_FRAMES} frames, got {int(lengths.min())}")

    b, t, f = features.shape
    x = features.reshape(b, 1, t, f)
    first = relu(conv2d(x, p.w1, p.b1))
    first_lengths = np.array([conv_output_length(n) for n in lengths])
    # positions past a sequence's end must look like the zero padding of an unbatched run
    valid = np.arange(first.shape[2])[None, :] < first_lengths[:, None]
    first = mul(first, valid[:, None, :, None].astype(first.data.dtype))
    second = relu(conv2d(first, p.w2, p.b2))
    out_lengths = np.array([conv_output_length(n) for n in first_lengths])

    _, c, t2, f2 = second.shape
    if t2 > pe.shape[0]:
        raise ValueError(f"{t2} frames after subsampling exceed max_positions {pe.shape[0]}")
    flat = transpose(second, (0, 2, 1, 3)).reshape(b, t2, c * f2)
    projected = flat @ p.w_proj + p.b_proj
    return projected + pe[:t2], out_lengths

