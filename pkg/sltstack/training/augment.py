"""
Data Augmentation
Averaged-embedding regularisation and MT corpora augmented with ASR hypotheses
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..decoding.beam import DecodeConfig, beam_search
from ..decoding.parallel import decode_corpus
from ..decoding.scorers import ModelScorer
from ..errors import DecodeError
from ..numcore.functional import embedding, where
from ..numcore.tensor import Tensor
from ..tasks.corpus import ParallelExample
from ..tasks.tokenize import ids_to_text
from ..tasks.vocabulary import Vocabulary
from ..transformer.model import SeqModel

logger = logging.getLogger(__name__)


def embedding_average_augment(
    embedded: Tensor,
    embedding_table: Tensor,
    rate: float,
    rng: np.random.Generator,
) -> Tensor:
    """
    Average randomly chosen positions with random vocabulary embeddings

    Each position is selected independently with probability ``rate``; a
    selected vector becomes the mean of itself and a uniformly drawn row of
    the table. Unselected positions are returned bitwise unchanged.

    Args:
        embedded: (..., d_model) looked-up embeddings
        embedding_table: (V, d_model) table the rows are drawn from
        rate: Selection probability in [0, 1]
        rng: Generator for selection and row draws

    Returns:
        Tensor shaped like ``embedded``
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    if rate == 0.0:
        return embedded
    positions = embedded.shape[:-1]
    selected = rng.random(positions) < rate
    rows = rng.integers(0, embedding_table.shape[0], size=positions)
    averaged = (embedded + embedding(embedding_table, rows)) * 0.5
    return where(selected[..., None], averaged, embedded)


@dataclass
class AugmentedCorpus:
    examples: List[ParallelExample]
    skipped: int


def augment_with_hypotheses(
    mt_corpus: Sequence[ParallelExample],
    asr_model: SeqModel,
    asr_vocab: Vocabulary,
    beam: int = 10,
    decode_cfg: Optional[DecodeConfig] = None,
    workers: int = 1,
) -> AugmentedCorpus:
    """
    Union of the oracle pairs and (1-best ASR transcript, target) pairs

    Examples whose transcript cannot be decoded, or decodes to empty text,
    contribute only their oracle pair and are counted as skipped.

    Args:
        mt_corpus: Examples with features
        asr_model: Trained speech-to-transcript model
        asr_vocab: Vocabulary of the ASR output
        beam: ASR beam width
        decode_cfg: Full beam settings (``beam`` is ignored when given)
        workers: Decoding threads

    Returns:
        AugmentedCorpus
    """
    cfg = decode_cfg or DecodeConfig(beam=beam, n_best=1)

    def transcribe(ex: ParallelExample) -> Optional[str]:
        if ex.features is None:
            raise DecodeError(f"example {ex.uid} has no features")
        best = beam_search(ModelScorer.for_input(asr_model, ex.features.frames), cfg)[0]
        return ids_to_text(best.tokens, asr_vocab)

    hypotheses = decode_corpus(transcribe, mt_corpus, workers=workers)
    augmented = list(mt_corpus)
    skipped = 0
    for ex, text in zip(mt_corpus, hypotheses):
        if not text:
            logger.warning("Skipping hypothesis augmentation for %s: no usable ASR output", ex.uid)
            skipped += 1
            continue
        augmented.append(ParallelExample(f"{ex.uid}-hyp", text, ex.target_text, ex.features))
    logger.info("Augmented %d examples with %d ASR hypotheses (%d skipped)", len(mt_corpus), len(augmented) - len(mt_corpus), skipped)
    return AugmentedCorpus(augmented, skipped)
