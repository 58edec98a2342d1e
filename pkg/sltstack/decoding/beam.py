"""
Beam Search
EOS-thresholded beam search with length-normalized ranking
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..errors import DecodeError
from ..tasks.vocabulary import EOS_ID, PAD_ID, SOS_ID, UNK_ID

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-4


class DecodeConfig(BaseModel):
    """Beam width, length penalty, EOS threshold and output size"""

    beam: int = Field(10, ge=1)
    length_penalty_alpha: float = Field(1.0, ge=0.0)
    eos_gamma: float = Field(1.0, ge=0.0)
    max_len: int = Field(50, ge=1)
    n_best: int = Field(1, ge=1)
    sos_id: int = SOS_ID
    eos_id: int = EOS_ID
    blocked_ids: Tuple[int, ...] = (PAD_ID, UNK_ID, SOS_ID)

    @model_validator(mode="after")
    def _check_n_best(self) -> "DecodeConfig":
        if self.n_best > self.beam:
            raise ValueError(f"n_best ({self.n_best}) cannot exceed beam ({self.beam})")
        if self.eos_id in self.blocked_ids:
            raise ValueError("eos cannot be a blocked token")
        return self


@dataclass
class StepOutput:
    """Next-token probabilities (n, V) and, optionally, the decoder states (n, d) that produced them"""

    probs: np.ndarray
    hidden: Optional[np.ndarray] = None


class Scorer(Protocol):
    vocab_size: int

    def score(self, prefixes: np.ndarray) -> StepOutput:
        """Distributions for (n, L) prefixes that start with sos"""


@dataclass
class Hypothesis:
    """
    A decoded token sequence

    ``tokens`` excludes sos and ends with eos once finished. ``prior`` is an
    upstream score the search started from (the ASR score of a ranked
    cascade); ``logprob`` covers this search's tokens only. The prior is the
    same for every hypothesis of one search, so length normalization applies
    to ``logprob`` alone and a prior never reorders a beam.
    """

    tokens: Tuple[int, ...]
    logprob: float
    finished: bool = False
    prior: float = 0.0
    hidden_trace: Optional[List[np.ndarray]] = None
    step_logprobs: List[float] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.prior + self.logprob

    def normalized_score(self, alpha: float) -> float:
        return length_normalized_score(self.logprob, max(len(self.tokens), 1), alpha)


def length_normalized_score(logprob: float, length: int, alpha: float) -> float:
    """logprob / length^alpha"""
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    return logprob / (length ** alpha)


def ranking_key(hyp: Hypothesis, alpha: float):
    """Best first; ties broken by lexicographic token order"""
    return -hyp.normalized_score(alpha), hyp.tokens


def combined_key(hyp: Hypothesis):
    """Raw prior + logprob, best first; ranks candidates pooled from several searches"""
    return -hyp.total, hyp.tokens


def _checked_step(scorer: Scorer, prefixes: np.ndarray) -> StepOutput:
    out = scorer.score(prefixes)
    probs = np.asarray(out.probs, dtype=np.float64)
    if probs.shape != (prefixes.shape[0], scorer.vocab_size):
        raise DecodeError(f"scorer returned shape {probs.shape}, expected {(prefixes.shape[0], scorer.vocab_size)}")
    sums = probs.sum(axis=-1)
    if np.any(probs < 0) or np.any(np.abs(sums - 1.0) > NORMALIZATION_TOLERANCE):
        raise DecodeError(f"scorer returned an unnormalized distribution (row sums {sums.tolist()})")
    return StepOutput(probs, out.hidden)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _extend(hyp: Hypothesis, token: int, logp: float, hidden: Optional[np.ndarray], finished: bool) -> Hypothesis:
    trace = None
    if hyp.hidden_trace is not None:
        if hidden is None:
            raise DecodeError("hidden states requested but the scorer does not provide them")
        trace = hyp.hidden_trace + [hidden]
    return Hypothesis(
        tokens=hyp.tokens + (token,),
        logprob=hyp.logprob + logp,
        finished=finished,
        prior=hyp.prior,
        hidden_trace=trace,
        step_logprobs=hyp.step_logprobs + [logp],
    )


def beam_search(
    scorer: Scorer,
    cfg: DecodeConfig,
    prior: float = 0.0,
    record_hidden: bool = False,
) -> List[Hypothesis]:
    """
    Beam search over a next-token scorer

    Each step expands every live prefix. An eos candidate is admitted only
    when p(eos) >= eos_gamma * p(best non-eos token); admitted eos
    candidates ranking inside the top ``beam`` candidates finish, and the
    best ``beam`` non-eos candidates stay live. After ``max_len`` non-eos
    tokens eos is forced with its true probability. The search stops early
    once ``beam`` hypotheses have finished and no live prefix can still
    reach the beam-th finished score.

    Args:
        scorer: Next-token distribution provider
        cfg: Search settings
        prior: Score every hypothesis starts from
        record_hidden: Keep the scorer's decoder state for every emitted token

    Returns:
        Up to ``cfg.n_best`` finished hypotheses, best first
    """
    alpha = cfg.length_penalty_alpha
    blocked = set(cfg.blocked_ids) | {cfg.eos_id}
    live = [Hypothesis((), 0.0, prior=prior, hidden_trace=[] if record_hidden else None)]
    finished: List[Hypothesis] = []

    for _ in range(cfg.max_len):
        if not live:
            break
        step = _checked_step(scorer, _prefix_array(live, cfg.sos_id))
        candidates: List[Hypothesis] = []
        for row, hyp in enumerate(live):
            probs = step.probs[row]
            hidden = step.hidden[row] if step.hidden is not None else None
            allowed = [v for v in range(scorer.vocab_size) if v not in blocked and probs[v] > 0]
            top = max((probs[v] for v in allowed), default=0.0)
            for v in allowed:
                candidates.append(_extend(hyp, v, _log(probs[v]), hidden, finished=False))
            p_eos = probs[cfg.eos_id]
            if p_eos > 0 and (top == 0.0 or p_eos >= cfg.eos_gamma * top):
                candidates.append(_extend(hyp, cfg.eos_id, _log(p_eos), hidden, finished=True))

        candidates.sort(key=lambda h: (-h.logprob, h.tokens))
        finished.extend(h for h in candidates[:cfg.beam] if h.finished)
        live = [h for h in candidates if not h.finished][:cfg.beam]

        if len(finished) >= cfg.beam and live:
            threshold = sorted(h.normalized_score(alpha) for h in finished)[-cfg.beam]
            bound_length = cfg.max_len + 1
            if all(length_normalized_score(h.logprob, bound_length, alpha) < threshold for h in live):
                live = []
                break

    if live:
        step = _checked_step(scorer, _prefix_array(live, cfg.sos_id))
        for row, hyp in enumerate(live):
            logp = _log(step.probs[row][cfg.eos_id])
            if logp == -math.inf:
                continue
            hidden = step.hidden[row] if step.hidden is not None else None
            finished.append(_extend(hyp, cfg.eos_id, logp, hidden, finished=True))

    if not finished:
        raise DecodeError("beam search produced no finished hypothesis")
    logger.debug("Beam search finished %d hypotheses", len(finished))
    finished.sort(key=lambda h: ranking_key(h, alpha))
    return finished[:cfg.n_best]


def _prefix_array(live: Sequence[Hypothesis], sos_id: int) -> np.ndarray:
    return np.array([(sos_id,) + h.tokens for h in live], dtype=np.int64)


def force_decode(scorer: Scorer, tokens: Sequence[int], sos_id: int = SOS_ID) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Score a fixed token sequence step by step

    Returns:
        Tuple: per-token log-probabilities and the decoder states (empty if
        the scorer reports none)
    """
    logprobs, hiddens = [], []
    prefix = [sos_id]
    for token in tokens:
        step = _checked_step(scorer, np.array([prefix], dtype=np.int64))
        logprobs.append(_log(step.probs[0][token]))
        if step.hidden is not None:
            hiddens.append(step.hidden[0])
        prefix.append(token)
    return np.array(logprobs), hiddens

