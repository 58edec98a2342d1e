"""
Cascade Decoding
ASR-then-MT search in one-best, n-best and ranked n-best modes
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence

import numpy as np

from ..errors import DecodeError
from ..tasks.tokenize import ids_to_text, tokenize
from ..tasks.vocabulary import Vocabulary
from ..transformer.model import SeqModel
from .beam import DecodeConfig, Hypothesis, Scorer, beam_search, combined_key
from .scorers import ModelScorer

logger = logging.getLogger(__name__)

CascadeMode = Literal["one_best", "n_best", "ranked_n_best"]
CASCADE_MODES = ("one_best", "n_best", "ranked_n_best")


@dataclass
class CascadeResult:
    """The chosen translation, the transcript it came from and every candidate considered"""

    translation: Hypothesis
    transcript: Hypothesis
    candidates: List[Hypothesis] = field(default_factory=list)
    transcripts: List[Hypothesis] = field(default_factory=list)

    @property
    def combined_score(self) -> float:
        """log P(y|z) + log P(z|x) of the returned pair"""
        return self.translation.logprob + self.transcript.logprob


def cascade_search(
    asr_scorer: Scorer,
    mt_scorer_for: Callable[[Hypothesis], Optional[Scorer]],
    mode: CascadeMode,
    cfg_asr: DecodeConfig,
    cfg_mt: DecodeConfig,
) -> CascadeResult:
    """
    Coupled ASR/MT search

    one_best translates the best non-empty transcript; n_best translates the
    ``cfg_asr.n_best`` transcripts and keeps the best MT-only score;
    ranked_n_best starts each MT beam from its transcript's log-probability
    and keeps the best log P(y|z) + log P(z|x). Length normalization only
    ranks hypotheses inside one MT beam; the pooled candidates compare raw
    log-probabilities.

    Args:
        asr_scorer: Transcript scorer for one utterance
        mt_scorer_for: Builds the MT scorer for a transcript; None marks an empty transcript
        mode: Search mode
        cfg_asr: ASR beam settings (``n_best`` transcripts are kept)
        cfg_mt: MT beam settings

    Returns:
        CascadeResult
    """
    if mode not in CASCADE_MODES:
        raise ValueError(f"unknown cascade mode {mode!r}; expected one of {CASCADE_MODES}")
    transcripts = beam_search(asr_scorer, cfg_asr)
    usable = []
    for z in transcripts:
        scorer = mt_scorer_for(z)
        if scorer is None:
            logger.debug("Skipping empty transcript hypothesis %s", z.tokens)
            continue
        usable.append((z, scorer))
    if not usable:
        raise DecodeError("every ASR hypothesis was empty")
    if mode == "one_best":
        usable = usable[:1]

    best: Optional[CascadeResult] = None
    candidates: List[Hypothesis] = []
    for z, scorer in usable:
        prior = z.logprob if mode == "ranked_n_best" else 0.0
        for y in beam_search(scorer, cfg_mt, prior=prior):
            candidates.append(y)
            if best is None or combined_key(y) < combined_key(best.translation):
                best = CascadeResult(translation=y, transcript=z)
    best.candidates = candidates
    best.transcripts = [z for z, _ in usable]
    return best


def retokenize(ids: Sequence[int], from_vocab: Vocabulary, to_vocab: Vocabulary) -> Optional[np.ndarray]:
    """Granularity bridge: detokenize to text, tokenize for the next model; None if the text is empty"""
    text = ids_to_text(ids, from_vocab)
    if not text.strip():
        return None
    return np.array(tokenize(text, to_vocab).ids, dtype=np.int64)


def cascade_decode(
    asr: SeqModel,
    mt: SeqModel,
    features: np.ndarray,
    mode: CascadeMode,
    cfg_asr: DecodeConfig,
    cfg_mt: DecodeConfig,
    asr_vocab: Vocabulary,
    mt_src_vocab: Vocabulary,
) -> CascadeResult:
    """
    Translate speech through an ASR model and an MT model

    Args:
        asr: Speech-to-transcript model
        mt: Text-to-translation model
        features: (T, F) utterance features
        mode: one_best | n_best | ranked_n_best
        cfg_asr: ASR beam settings
        cfg_mt: MT beam settings
        asr_vocab: Vocabulary of the ASR output
        mt_src_vocab: Vocabulary of the MT input

    Returns:
        CascadeResult
    """
    def mt_scorer_for(z: Hypothesis) -> Optional[Scorer]:
        ids = retokenize(z.tokens, asr_vocab, mt_src_vocab)
        return None if ids is None else ModelScorer.for_input(mt, ids)

    return cascade_search(ModelScorer.for_input(asr, features), mt_scorer_for, mode, cfg_asr, cfg_mt)
