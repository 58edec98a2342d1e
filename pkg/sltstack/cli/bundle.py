"""
Model Bundles
A trained model directory: architecture, vocabularies and averaged parameters
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..errors import ConfigError
from ..numcore.params import load_checkpoint, save_checkpoint
from ..tasks.corpus import ParallelExample
from ..tasks.tokenize import tokenize
from ..tasks.vocabulary import Vocabulary
from ..transformer.config import ModelConfig
from ..transformer.model import SeqModel

logger = logging.getLogger(__name__)

MANIFEST_FILE = "model.json"
PARAMS_FILE = "model.sqbr"
EPOCHS_DIR = "epochs"


@dataclass
class ModelBundle:
    role: str
    model: SeqModel
    output_vocab: Vocabulary
    input_vocab: Optional[Vocabulary] = None

    @property
    def speech_input(self) -> bool:
        return self.model.config.input_mode == "speech"

    def inputs_for(self, example: ParallelExample) -> np.ndarray:
        """Features for speech models, source ids for text models"""
        if self.speech_input:
            if example.features is None:
                raise ValueError(f"example {example.uid} has no features")
            return example.features.frames
        return np.array(tokenize(example.source_text, self.input_vocab).ids, dtype=np.int64)

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "role": self.role,
            "model": self.model.config.model_dump(mode="json"),
            "seed": self.model.seed,
            "output_vocab": self.output_vocab.to_dict(),
            "input_vocab": self.input_vocab.to_dict() if self.input_vocab is not None else None,
        }
        (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        save_checkpoint(directory / PARAMS_FILE, self.model.params.snapshot())
        logger.info("Saved %s model to %s", self.role, directory)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path], checkpoint: Optional[Union[str, Path]] = None) -> "ModelBundle":
        """
        Rebuild a saved model

        Args:
            directory: Bundle directory
            checkpoint: Parameter file to load instead of the bundle's averaged one
        """
        directory = Path(directory)
        manifest_path = directory / MANIFEST_FILE
        if not manifest_path.exists():
            raise ConfigError(f"{directory} is not a model directory (no {MANIFEST_FILE})")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        model = SeqModel(ModelConfig.model_validate(manifest["model"]), seed=manifest.get("seed", 0))
        model.params.load(load_checkpoint(checkpoint or directory / PARAMS_FILE))
        input_vocab = manifest.get("input_vocab")
        return cls(
            role=manifest["role"],
            model=model,
            output_vocab=Vocabulary.from_dict(manifest["output_vocab"]),
            input_vocab=Vocabulary.from_dict(input_vocab) if input_vocab else None,
        )
