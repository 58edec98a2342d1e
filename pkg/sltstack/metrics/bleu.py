"""
Corpus BLEU
BLEU-4 over corpus-aggregated clipped n-gram counts
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

from .wer import Text, word_tokens

MAX_ORDER = 4


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) + 1 - n))


@dataclass
class BleuStats:
    """Sufficient statistics; the score is a pure function of these"""

    matches: List[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: List[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    @property
    def precisions(self) -> List[float]:
        return [m / t if t else 0.0 for m, t in zip(self.matches, self.totals)]

    @property
    def brevity_penalty(self) -> float:
        if self.hyp_len == 0:
            return 0.0
        return min(1.0, math.exp(1.0 - self.ref_len / self.hyp_len))

    def score(self) -> float:
        """BLEU on the 0-100 scale; 0 when any precision is 0"""
        precisions = self.precisions
        if any(p == 0.0 for p in precisions):
            return 0.0
        log_mean = math.fsum(math.log(p) for p in precisions) / len(precisions)
        return 100.0 * self.brevity_penalty * math.exp(log_mean)

    def to_dict(self) -> Dict:
        return {"matches": list(self.matches), "totals": list(self.totals), "hyp_len": self.hyp_len, "ref_len": self.ref_len}

    @classmethod
    def from_dict(cls, data: Dict) -> "BleuStats":
        return cls(list(data["matches"]), list(data["totals"]), int(data["hyp_len"]), int(data["ref_len"]))


def sentence_stats(ref: Sequence[str], hyp: Sequence[str]) -> BleuStats:
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        hyp_counts = ngram_counts(hyp, n)
        ref_counts = ngram_counts(ref, n)
        matches.append(sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items()))
        totals.append(sum(hyp_counts.values()))
    return BleuStats(matches, totals, len(hyp), len(ref))


def bleu_stats(refs: Sequence[Text], hyps: Sequence[Text]) -> BleuStats:
    """
    Clipped n-gram matches and totals summed over the corpus

    Args:
        refs: Reference sentences, as strings (whitespace-split) or token lists
        hyps: Hypotheses aligned with ``refs``

    Returns:
        BleuStats
    """
    if not refs:
        raise ValueError("BLEU is undefined for an empty corpus")
    if len(refs) != len(hyps):
        raise ValueError(f"unequal number of references and hypotheses: {len(refs)} and {len(hyps)}")
    total = BleuStats()
    for ref, hyp in zip(refs, hyps):
        total = total + sentence_stats(word_tokens(ref), word_tokens(hyp))
    return total


def corpus_bleu(refs: Sequence[Text], hyps: Sequence[Text]) -> float:
    return bleu_stats(refs, hyps).score()
