"""
Joint Decoding
N-best decoding of the joint model through ASR decoder states, with optional ensembles
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, DecodeError
from ..numcore.tensor import Tensor, no_grad
from ..tasks.vocabulary import Vocabulary
from ..training.joint import JointModel
from ..transformer.model import SeqModel
from .beam import DecodeConfig, Hypothesis, Scorer, beam_search, combined_key
from .cascade import retokenize
from .scorers import EnsembleScorer, ModelScorer

logger = logging.getLogger(__name__)

ENSEMBLE_VARIANTS = ("stand-alone", "ens-asr", "ens-mt", "ens-asr+ens-mt")


@dataclass
class JointResult:
    translation: Hypothesis
    transcript: Hypothesis
    pairs: List[Tuple[Hypothesis, Hypothesis]] = field(default_factory=list)

    @property
    def combined_score(self) -> float:
        return self.translation.logprob + self.transcript.logprob


def trace_scorer(joint: JointModel, transcript: Hypothesis) -> ModelScorer:
    """MT scorer over the connector-mapped decoder states of one transcript"""
    trace = transcript.hidden_trace
    if not trace or len(trace) != len(transcript.tokens):
        raise DecodeError(f"transcript {transcript.tokens} has no decoder hidden states recorded")
    hidden = Tensor(np.stack(trace)[None])
    mask = np.ones((1, len(trace)), dtype=bool)
    joint.eval()
    with no_grad():
        memory, mask = joint.bridge(hidden, mask)
    return ModelScorer(joint.mt, memory, mask)


def decode_from_transcripts(
    joint: JointModel,
    transcripts: Sequence[Hypothesis],
    cfg_mt: DecodeConfig,
    partner_for: Optional[Callable[[Hypothesis], Optional[Scorer]]] = None,
) -> JointResult:
    """
    Translate every transcript's hidden trace and keep the best combined score

    Each MT beam starts from its transcript's log-probability, so the
    ranking uses log P(y | bridge(z)) + log P(z | x).

    Args:
        joint: Joint model
        transcripts: ASR n-best with hidden traces
        cfg_mt: MT beam settings
        partner_for: Optional extra MT scorer per transcript, averaged in
    """
    if not transcripts:
        raise DecodeError("no transcripts to translate")
    best: Optional[JointResult] = None
    pairs = []
    for z in transcripts:
        scorer: Scorer = trace_scorer(joint, z)
        partner = partner_for(z) if partner_for is not None else None
        if partner is not None:
            scorer = EnsembleScorer([scorer, partner])
        for y in beam_search(scorer, cfg_mt, prior=z.logprob):
            pairs.append((z, y))
            if best is None or combined_key(y) < combined_key(best.translation):
                best = JointResult(y, z)
    best.pairs = pairs
    return best


def joint_decode(
    joint: JointModel,
    features: np.ndarray,
    cfg_asr: DecodeConfig,
    cfg_mt: DecodeConfig,
    variant: str = "stand-alone",
    asr_partner: Optional[SeqModel] = None,
    mt_partner: Optional[SeqModel] = None,
    asr_vocab: Optional[Vocabulary] = None,
    mt_src_vocab: Optional[Vocabulary] = None,
) -> JointResult:
    """
    Decode speech with the joint model

    The ASR beam keeps a decoder state per emitted token; every n-best
    trace goes through the connector into the MT encoder and its own MT
    beam. Ensemble variants average the joint ASR with a stand-alone ASR
    (ens-asr) and/or the joint MT with a stand-alone MT reading the
    re-tokenized transcript (ens-mt).

    Args:
        joint: Joint model
        features: (T, F) utterance features
        cfg_asr: ASR beam settings; ``n_best`` traces are translated
        cfg_mt: MT beam settings
        variant: stand-alone | ens-asr | ens-mt | ens-asr+ens-mt
        asr_partner: Stand-alone ASR model for ens-asr
        mt_partner: Stand-alone MT model for ens-mt
        asr_vocab: ASR output vocabulary for ens-mt re-tokenization
        mt_src_vocab: MT input vocabulary for ens-mt re-tokenization

    Returns:
        JointResult
    """
    if variant not in ENSEMBLE_VARIANTS:
        raise ValueError(f"unknown ensemble variant {variant!r}; expected one of {ENSEMBLE_VARIANTS}")
    use_asr_partner = variant in ("ens-asr", "ens-asr+ens-mt")
    use_mt_partner = variant in ("ens-mt", "ens-asr+ens-mt")
    if use_asr_partner and asr_partner is None:
        raise ConfigError(f"variant {variant} needs a stand-alone ASR model")
    if use_mt_partner and (mt_partner is None or asr_vocab is None or mt_src_vocab is None):
        raise ConfigError(f"variant {variant} needs a stand-alone MT model and both vocabularies")

    joint.eval()
    asr_scorer: Scorer = ModelScorer.for_input(joint.asr, features)
    if use_asr_partner:
        asr_scorer = EnsembleScorer([asr_scorer, ModelScorer.for_input(asr_partner, features)])
    transcripts = beam_search(asr_scorer, cfg_asr, record_hidden=True)

    partner_for = None
    if use_mt_partner:
        def partner_for(z: Hypothesis) -> Optional[Scorer]:
            ids = retokenize(z.tokens, asr_vocab, mt_src_vocab)
            return None if ids is None else ModelScorer.for_input(mt_partner, ids)

    return decode_from_transcripts(joint, transcripts, cfg_mt, partner_for)
