"""
Toy Corpus
Synthetic reverse-and-map parallel corpora with pseudo-speech features
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .features import FeatureConfig, FeatureSequence, FeatureSynthesizer, cmvn
from .tokenize import normalize_text, tokenize
from .vocabulary import Vocabulary

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]

# Two-letter syllable "words"; every one of them is a single merge in merges.json
SOURCE_LEXICON = (
    "ka", "ki", "ko", "ku", "ma", "mi", "mo", "mu", "na", "ni", "no", "nu", "ra",
    "ri", "ro", "ru", "sa", "si", "so", "su", "ta", "ti", "to", "tu", "pa", "pi",
)
TARGET_LEXICON = (
    "be", "bo", "de", "do", "fe", "fo", "ge", "go", "he", "ho", "je", "jo", "le",
    "lo", "ve", "vo", "we", "wo", "ze", "zo", "ye", "yo", "ce", "co", "xe", "xo",
)
SPLITS = ("train", "dev", "test")


class CorpusConfig(BaseModel):
    """Shape of the synthetic task"""

    alphabet_size: int = Field(12, ge=4)
    min_len: int = Field(3, ge=1)
    max_len: int = Field(8, ge=1)
    source_lexicon: Optional[List[str]] = None
    target_lexicon: Optional[List[str]] = None
    n_train: int = Field(500, ge=1)
    n_dev: int = Field(50, ge=1)
    n_test: int = Field(50, ge=1)
    features: FeatureConfig = Field(default_factory=FeatureConfig)

    @model_validator(mode="after")
    def _check_lexicons(self) -> "CorpusConfig":
        if self.min_len > self.max_len:
            raise ValueError(f"min_len ({self.min_len}) exceeds max_len ({self.max_len})")
        for name, words in (("source", self.source_words), ("target", self.target_words)):
            if len(words) < self.alphabet_size:
                raise ValueError(f"{name} lexicon has {len(words)} words, alphabet needs {self.alphabet_size}")
            if len(set(words)) != len(words) or any(not w or " " in w for w in words):
                raise ValueError(f"{name} lexicon words must be unique, non-empty and space-free")
        return self

    @property
    def source_words(self) -> List[str]:
        return list(self.source_lexicon or SOURCE_LEXICON)[:self.alphabet_size]

    @property
    def target_words(self) -> List[str]:
        return list(self.target_lexicon or TARGET_LEXICON)[:self.alphabet_size]

    def split_size(self, split: str) -> int:
        return {"train": self.n_train, "dev": self.n_dev, "test": self.n_test}[split]


@dataclass(frozen=True)
class ParallelExample:
    uid: str
    source_text: str
    target_text: str
    features: Optional[FeatureSequence] = None

    def __post_init__(self):
        if not self.source_text or not self.target_text:
            raise ValueError(f"example {self.uid}: source and target texts must be non-empty")


def translate_oracle(source: str, cfg: CorpusConfig) -> str:
    """The exact translation: reverse the source words and map each through the bijection"""
    mapping = dict(zip(cfg.source_words, cfg.target_words))
    words = source.split()
    unknown = [w for w in words if w not in mapping]
    if unknown:
        raise ValueError(f"words outside the source lexicon: {unknown}")
    return " ".join(mapping[w] for w in reversed(words))


def gen_toy_corpus(seed: Seed, n: int, cfg: CorpusConfig) -> List[Tuple[str, str]]:
    """
    Random source sentences paired with their reverse-and-map translations

    Args:
        seed: Generator seed
        n: Number of pairs
        cfg: Alphabet size, length range and lexicons

    Returns:
        List of (source_text, target_text)
    """
    rng = np.random.default_rng(seed)
    source_words, target_words = cfg.source_words, cfg.target_words
    pairs = []
    for _ in range(n):
        length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
        idx = rng.integers(0, cfg.alphabet_size, size=length)
        source = " ".join(source_words[i] for i in idx)
        target = " ".join(target_words[i] for i in idx[::-1])
        pairs.append((source, target))
    return pairs


def word_vocabulary(cfg: CorpusConfig) -> Vocabulary:
    """Word-level source vocabulary; its ids key the feature prototypes"""
    return Vocabulary(cfg.source_words, mode="word")


def make_splits(cfg: CorpusConfig, seed: int) -> Dict[str, List[ParallelExample]]:
    """
    Train, dev and test splits with CMVN-normalised synthetic features

    Args:
        cfg: Task configuration
        seed: Master seed; splits and utterances derive their own seeds from it

    Returns:
        Dict: split name -> examples
    """
    words = word_vocabulary(cfg)
    synthesizer = FeatureSynthesizer(cfg.features)
    splits: Dict[str, List[ParallelExample]] = {}
    for split_index, split in enumerate(SPLITS):
        examples = []
        for i, (source, target) in enumerate(gen_toy_corpus([seed, split_index], cfg.split_size(split), cfg)):
            frames = synthesizer.synthesize(tokenize(source, words), seed=[seed, split_index, i])
            examples.append(ParallelExample(f"{split}-{i:05d}", source, target, cmvn(frames)))
        splits[split] = examples
        logger.info("Generated %d %s examples", len(examples), split)
    return splits


def write_dataset(path: Union[str, Path], examples: Sequence[ParallelExample]) -> None:
    """One JSON object per line with ``source``, ``target`` and optional ``features``"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            record = {"id": ex.uid, "source": ex.source_text, "target": ex.target_text}
            if ex.features is not None:
                record["features"] = ex.features.frames.tolist()
            f.write(json.dumps(record) + "\n")
    logger.info("Wrote %d examples to %s", len(examples), path)


def read_dataset(path: Union[str, Path], normalize: bool = True) -> List[ParallelExample]:
    """
    Load a JSONL dataset written by ``write_dataset`` or prepared by hand

    Texts are normalized (lower-cased, punctuation dropped, whitespace
    collapsed) unless ``normalize`` is False; generated corpora are already
    in that form.

    Raises:
        ValueError: naming the file and line of a malformed record
    """
    clean = normalize_text if normalize else (lambda text: text)
    examples = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                features = record.get("features")
                examples.append(ParallelExample(
                    uid=str(record.get("id", f"utt-{line_no:05d}")),
                    source_text=clean(record["source"]),
                    target_text=clean(record["target"]),
                    features=FeatureSequence(np.asarray(features, dtype=np.float32)) if features is not None else None,
                ))
            except (KeyError, TypeError, AttributeError, ValueError) as e:
                raise ValueError(f"{path}:{line_no}: malformed dataset record ({e})") from e
    return examples
