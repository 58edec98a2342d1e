"""
Joint Model
ASR and MT sub-models bridged by a connector over ASR decoder states
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError
from ..numcore.functional import layer_norm
from ..numcore.params import ModelParams, glorot_uniform, load_checkpoint
from ..numcore.tensor import Tensor
from ..tasks.vocabulary import PAD_ID
from ..transformer.config import ModelConfig
from ..transformer.layers import AttentionParams, FfnParams, multi_head_attention, position_wise_ffn
from ..transformer.loss import label_smoothed_loss
from ..transformer.model import SeqModel
from .batching import Batch

logger = logging.getLogger(__name__)

ConnectorKind = Literal["identity", "linear", "self_attention"]
FreezeMode = Literal["connector-only", "full"]
CONNECTOR_KINDS = ("identity", "linear", "self_attention")


class Connector:
    """
    Maps ASR decoder states (d_in) to MT encoder inputs (d_out)

    identity needs d_in == d_out and has no parameters; linear is one affine
    map; self_attention is an input projection followed by ``n_layers``
    pre-norm self-attention blocks.
    """

    def __init__(
        self,
        kind: ConnectorKind,
        d_in: int,
        d_out: int,
        seed: int = 0,
        n_layers: int = 1,
        h: int = 4,
        d_ff: Optional[int] = None,
    ):
        if kind not in CONNECTOR_KINDS:
            raise ConfigError(f"unknown connector kind {kind!r}; expected one of {CONNECTOR_KINDS}")
        if kind == "identity" and d_in != d_out:
            raise ConfigError(f"identity connector needs equal widths, got ASR {d_in} and MT {d_out}")
        if kind == "self_attention" and n_layers < 1:
            raise ConfigError("a self-attention connector needs at least one layer; use kind='linear' for a linear-only bridge")
        self.kind = kind
        self.d_in, self.d_out = d_in, d_out
        self.params = ModelParams()
        self.layers: List[Dict] = []
        rng = np.random.default_rng(seed)
        if kind == "identity":
            return
        self.params.add("proj.w", glorot_uniform(rng, d_in, d_out))
        self.params.add("proj.b", np.zeros(d_out))
        for i in range(n_layers if kind == "self_attention" else 0):
            self.layers.append({
                "attn": AttentionParams.create(self.params, f"layer{i}.attn", d_out, h, rng),
                "ffn": FfnParams.create(self.params, f"layer{i}.ffn", d_out, d_ff or 4 * d_out, rng),
                "ln": [
                    (self.params.add(f"layer{i}.ln{j}.gamma", np.ones(d_out)), self.params.add(f"layer{i}.ln{j}.beta", np.zeros(d_out)))
                    for j in range(2)
                ],
            })

    def __call__(self, hidden: Tensor, mask: np.ndarray) -> Tensor:
        if hidden.shape[-1] != self.d_in:
            raise ConfigError(f"connector expects width {self.d_in}, got {hidden.shape[-1]}")
        if self.kind == "identity":
            return hidden
        x = hidden @ self.params["proj.w"] + self.params["proj.b"]
        keep = np.asarray(mask, dtype=bool)[:, None, :]
        for layer in self.layers:
            ln_attn, ln_ffn = layer["ln"]
            y = layer_norm(x, *ln_attn)
            x = x + multi_head_attention(y, y, layer["attn"], keep)
            x = x + position_wise_ffn(layer_norm(x, *ln_ffn), layer["ffn"])
        return x


class JointModel:
    """Multi-task pipeline: speech -> ASR decoder states -> connector -> MT encoder -> translation"""

    def __init__(
        self,
        asr: SeqModel,
        mt: SeqModel,
        connector_kind: Optional[ConnectorKind] = "linear",
        freeze_mode: FreezeMode = "full",
        connector_layers: int = 1,
        seed: int = 0,
    ):
        if asr.config.input_mode != "speech":
            raise ConfigError("the ASR half of a joint model must take speech input")
        if freeze_mode == "connector-only" and connector_kind in (None, "identity"):
            raise ConfigError("freeze_mode='connector-only' needs a trainable connector")
        self.asr = asr
        self.mt = mt
        self.freeze_mode = freeze_mode
        self.connector = Connector(
            connector_kind or "identity",
            asr.config.d_model,
            mt.config.d_model,
            seed=seed,
            n_layers=connector_layers,
            h=mt.config.h,
            d_ff=mt.config.d_ff,
        )

    @property
    def config(self) -> ModelConfig:
        """The ASR configuration; the learning-rate schedule follows its d_model"""
        return self.asr.config

    def named_parameters(self) -> "OrderedDict[str, Tensor]":
        named: "OrderedDict[str, Tensor]" = OrderedDict()
        for prefix, params in (("asr", self.asr.params), ("connector", self.connector.params), ("mt", self.mt.params)):
            for name, tensor in params.items():
                named[f"{prefix}.{name}"] = tensor
        return named

    def trainable_parameters(self) -> "OrderedDict[str, Tensor]":
        named = self.named_parameters()
        if self.freeze_mode == "full":
            return named
        return OrderedDict((n, t) for n, t in named.items() if n.startswith("connector."))

    def num_parameters(self) -> int:
        return int(sum(t.data.size for t in self.named_parameters().values()))

    def snapshot(self) -> Dict[str, np.ndarray]:
        return OrderedDict((n, t.data.astype(np.float32, copy=True)) for n, t in self.named_parameters().items())

    def load(self, arrays: Mapping[str, np.ndarray]) -> None:
        for prefix, params in (("asr", self.asr.params), ("connector", self.connector.params), ("mt", self.mt.params)):
            part = {n[len(prefix) + 1:]: a for n, a in arrays.items() if n.startswith(prefix + ".")}
            params.load(part)

    def train(self, rng: np.random.Generator, rate: Optional[float] = None) -> None:
        self.asr.train(rng, rate)
        self.mt.train(rng, rate)

    def eval(self) -> None:
        self.asr.eval()
        self.mt.eval()

    def bridge(self, hidden: Tensor, mask: np.ndarray) -> Tuple[Tensor, np.ndarray]:
        """Connector then MT encoder over ASR decoder states (B, L, d_asr)"""
        return self.mt.encode_continuous(self.connector(hidden, mask), mask), mask

    def losses(
        self,
        batch: Batch,
        label_smoothing: float,
        mt_loss_weight: float,
        augment=None,
    ) -> Tuple[Tensor, Tensor, Tensor]:
        """
        Teacher-forced multi-task loss of one batch

        The ASR decoder consumes the gold transcript; its final states at the
        transcript positions feed the connector, so the ASR stack receives
        gradients from both objectives.

        Returns:
            Tuple: (asr_loss + mt_loss_weight * mt_loss, asr_loss, mt_loss)
        """
        if batch.aux_targets is None:
            raise ValueError("joint batches need transcript targets (aux_targets)")
        asr_logits, asr_hidden = self.asr.forward(batch.inputs, batch.input_lengths, batch.aux_decoder_in, augment)
        asr_loss = label_smoothed_loss(asr_logits, batch.aux_targets, label_smoothing)
        bridge_mask = batch.aux_targets != PAD_ID
        memory, mask = self.bridge(asr_hidden, bridge_mask)
        mt_logits, _ = self.mt.decode(memory, mask, batch.decoder_in, augment)
        mt_loss = label_smoothed_loss(mt_logits, batch.targets, label_smoothing)
        return asr_loss + mt_loss * mt_loss_weight, asr_loss, mt_loss


CheckpointLike = Union[str, Path, Mapping[str, np.ndarray]]


def _as_checkpoint(ckpt: CheckpointLike) -> Mapping[str, np.ndarray]:
    return load_checkpoint(ckpt) if isinstance(ckpt, (str, Path)) else ckpt


def init_joint_from_pretrained(
    asr_ckpt: CheckpointLike,
    mt_ckpt: CheckpointLike,
    asr_config: ModelConfig,
    mt_config: ModelConfig,
    connector_kind: Optional[ConnectorKind] = "linear",
    freeze_mode: FreezeMode = "full",
    connector_layers: int = 1,
    seed: int = 0,
) -> JointModel:
    """
    Joint model whose ASR and MT halves start from trained checkpoints

    The connector is freshly initialised; the MT source embedding stays in
    the parameter set but is bypassed.

    Raises:
        ConfigError: naming the first layer whose name or shape does not match
    """
    asr = SeqModel(asr_config, seed=seed)
    mt = SeqModel(mt_config, seed=seed + 1)
    asr.params.load(_as_checkpoint(asr_ckpt))
    mt.params.load(_as_checkpoint(mt_ckpt))
    joint = JointModel(asr, mt, connector_kind, freeze_mode, connector_layers, seed=seed + 2)
    logger.info(
        "Initialised joint model from pretrained halves (%s connector, %d parameters, freeze=%s)",
        joint.connector.kind, joint.connector.params.num_parameters(), freeze_mode,
    )
    return joint
