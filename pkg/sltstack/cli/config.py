"""
Experiment Configuration
One JSON file describing the task, the models, training and decoding of an experiment
"""

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

from ..decoding.beam import DecodeConfig
from ..decoding.joint_decode import ENSEMBLE_VARIANTS
from ..tasks.corpus import SPLITS, CorpusConfig
from ..training.config import TrainConfig
from ..transformer.config import ModelConfig

ExperimentKind = Literal[
    "asr", "mt", "e2e",
    "cascade_one", "cascade_n", "cascade_ranked",
    "joint", "joint_ensemble",
    "augmented", "emb_avg",
    "pretrain_linear_freeze", "pretrain_linear_full",
    "pretrain_selfattn_freeze", "pretrain_selfattn_full",
]
Unit = Literal["char", "subword", "word"]
Role = Literal["asr", "mt", "e2e"]

CASCADE_KINDS = {"cascade_one": "one_best", "cascade_n": "n_best", "cascade_ranked": "ranked_n_best"}
PRETRAIN_KINDS = {
    "pretrain_linear_freeze": ("linear", "connector-only"),
    "pretrain_linear_full": ("linear", "full"),
    "pretrain_selfattn_freeze": ("self_attention", "connector-only"),
    "pretrain_selfattn_full": ("self_attention", "full"),
}


class ModelSpec(BaseModel):
    """Architecture of one role; vocabulary sizes and input mode come from the task"""

    n_enc_layers: int = Field(4, ge=0)
    n_dec_layers: int = Field(2, ge=0)
    d_model: int = Field(64, ge=2)
    d_ff: int = Field(256, ge=1)
    h: int = Field(4, ge=1)
    conv_channels: int = Field(16, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    norm_placement: Literal["pre", "post"] = "pre"
    max_positions: int = Field(512, ge=1)

    @classmethod
    def from_model_config(cls, cfg: ModelConfig) -> "ModelSpec":
        """The architecture part of a model preset"""
        return cls(**cfg.model_dump(include=set(cls.model_fields)))

    def build(self, input_mode: str, vocab_tgt: int, vocab_src: int = 0, feature_dim: int = 40) -> ModelConfig:
        return ModelConfig(
            **self.model_dump(),
            input_mode=input_mode,
            vocab_src=vocab_src,
            vocab_tgt=vocab_tgt,
            feature_dim=feature_dim,
        )


# Presets need vocabulary sizes; only their architecture is kept
PRESET_VOCAB = 8


def _default_models() -> Dict[str, ModelSpec]:
    return {
        "asr": ModelSpec.from_model_config(ModelConfig.desk_asr(PRESET_VOCAB)),
        "mt": ModelSpec.from_model_config(ModelConfig.desk_mt(PRESET_VOCAB, PRESET_VOCAB)),
        "e2e": ModelSpec.from_model_config(ModelConfig.desk_e2e(PRESET_VOCAB)),
    }


class ExperimentConfig(BaseModel):
    """
    A single experiment of the grid

    Desk-scale values are the defaults; ``configs/full.json`` carries the
    large-corpus settings.
    """

    kind: ExperimentKind
    experiment_id: Optional[str] = None
    seed: int = 0
    task: CorpusConfig = Field(default_factory=CorpusConfig)
    data_dir: Optional[str] = None
    asr_unit: Unit = "char"
    mt_src_unit: Unit = "subword"
    mt_tgt_unit: Unit = "subword"
    models: Dict[Role, ModelSpec] = Field(default_factory=_default_models)
    train: TrainConfig = Field(default_factory=TrainConfig)
    decode_asr: DecodeConfig = Field(default_factory=lambda: DecodeConfig(beam=10, length_penalty_alpha=1.0))
    decode_mt: DecodeConfig = Field(default_factory=lambda: DecodeConfig(beam=5, length_penalty_alpha=0.8))
    n_best: int = Field(4, ge=1)
    connector: Literal["identity", "linear", "self_attention"] = "linear"
    connector_layers: int = Field(1, ge=0)
    ensemble_variants: List[str] = Field(default_factory=lambda: list(ENSEMBLE_VARIANTS))
    eval_splits: List[str] = Field(default_factory=lambda: ["dev", "test"])
    checkpoints: Dict[Role, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        missing = [role for role in ("asr", "mt", "e2e") if role not in self.models]
        if missing:
            raise ValueError(f"models needs a spec for every role, missing {missing}")
        unknown = [s for s in self.eval_splits if s not in SPLITS]
        if unknown:
            raise ValueError(f"unknown eval splits {unknown}; expected a subset of {SPLITS}")
        bad = [v for v in self.ensemble_variants if v not in ENSEMBLE_VARIANTS]
        if bad:
            raise ValueError(f"unknown ensemble variants {bad}; expected a subset of {ENSEMBLE_VARIANTS}")
        if self.n_best > self.decode_asr.beam:
            raise ValueError(f"n_best ({self.n_best}) cannot exceed the ASR beam ({self.decode_asr.beam})")
        if self.kind == "emb_avg" and self.train.emb_avg_rate <= 0:
            raise ValueError("kind emb_avg needs train.emb_avg_rate > 0")
        for role, path in self.checkpoints.items():
            if not Path(path).exists():
                raise ValueError(f"checkpoint for {role} does not exist: {path}")
        return self

    @property
    def name(self) -> str:
        return self.experiment_id or self.kind

    @property
    def dataset_id(self) -> str:
        """Identifies the data every row of this experiment was scored on"""
        if self.data_dir is not None:
            digest = hashlib.sha256()
            for split in SPLITS:
                digest.update((Path(self.data_dir) / f"{split}.jsonl").read_bytes())
            return f"data-{digest.hexdigest()[:12]}"
        payload = json.dumps({"task": self.task.model_dump(mode="json"), "seed": self.seed}, sort_keys=True)
        return f"toy-{hashlib.sha256(payload.encode('utf-8')).hexdigest()[:12]}"

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON dump"""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def asr_decode(self, n_best: int = 1) -> DecodeConfig:
        return self.decode_asr.model_copy(update={"n_best": n_best})

    @classmethod
    def full_scale(cls, kind: str, **overrides) -> "ExperimentConfig":
        """Large-corpus architectures, schedule and beams (the values of ``configs/full.json``)"""
        values = dict(
            kind=kind,
            models={
                "asr": ModelSpec.from_model_config(ModelConfig.full_asr(PRESET_VOCAB)),
                "mt": ModelSpec.from_model_config(ModelConfig.full_mt(PRESET_VOCAB, PRESET_VOCAB)),
                "e2e": ModelSpec.from_model_config(ModelConfig.full_e2e(PRESET_VOCAB)),
            },
            train=TrainConfig.full_scale(),
            decode_asr=DecodeConfig(beam=10, length_penalty_alpha=1.0, max_len=200),
            decode_mt=DecodeConfig(beam=5, length_penalty_alpha=0.8, max_len=200),
            n_best=10,
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        data.update(overrides)
        return cls.model_validate(data)

    def to_file(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
