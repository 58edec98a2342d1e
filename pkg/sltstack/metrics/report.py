"""
Evaluation Report
Scores a hypothesis corpus against its references with WER, CER and BLEU
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence

from .bleu import BleuStats, bleu_stats
from .wer import Text, error_counts

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    wer: float
    cer: float
    bleu: float
    substitutions: int
    insertions: int
    deletions: int
    ref_words: int
    n_sentences: int
    bleu_stats: BleuStats = field(default_factory=BleuStats)

    def summary(self) -> str:
        """One line, the format the ``evaluate`` subcommand prints last"""
        return (
            f"WER {self.wer:.2f} (S={self.substitutions} I={self.insertions} D={self.deletions} "
            f"N={self.ref_words}) | CER {self.cer:.2f} | BLEU {self.bleu:.2f} | {self.n_sentences} sentences"
        )

    def to_dict(self) -> Dict:
        return {
            "wer": self.wer,
            "cer": self.cer,
            "bleu": self.bleu,
            "substitutions": self.substitutions,
            "insertions": self.insertions,
            "deletions": self.deletions,
            "ref_words": self.ref_words,
            "n_sentences": self.n_sentences,
            "bleu_stats": self.bleu_stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EvalReport":
        fields = {k: v for k, v in data.items() if k != "bleu_stats"}
        return cls(**fields, bleu_stats=BleuStats.from_dict(data["bleu_stats"]))


class CorpusScorer:
    """
    Scores detokenized hypotheses against references

    Empty hypotheses are kept (they count as all deletions) so that
    failed decodes lower the score instead of vanishing from it.
    """

    def __init__(self, lowercase: bool = False):
        self.lowercase = lowercase

    def _prepare(self, text: Text) -> str:
        text = text if isinstance(text, str) else " ".join(text)
        text = " ".join(text.split())
        return text.lower() if self.lowercase else text

    def score(self, refs: Sequence[Text], hyps: Sequence[Text]) -> EvalReport:
        """
        Build the report for one corpus

        Args:
            refs: Reference sentences
            hyps: Hypothesis sentences, line-aligned with ``refs``

        Returns:
            EvalReport
        """
        if len(refs) != len(hyps):
            raise ValueError(f"unequal number of references and hypotheses: {len(refs)} and {len(hyps)}")
        refs = [self._prepare(r) for r in refs]
        hyps = [self._prepare(h) for h in hyps]
        words = error_counts(refs, hyps, "word")
        chars = error_counts(refs, hyps, "char")
        stats = bleu_stats(refs, hyps)
        report = EvalReport(
            wer=words.rate,
            cer=chars.rate,
            bleu=stats.score(),
            substitutions=words.substitutions,
            insertions=words.insertions,
            deletions=words.deletions,
            ref_words=words.ref_len,
            n_sentences=len(refs),
            bleu_stats=stats,
        )
        logger.debug("Scored %d sentences: %s", len(refs), report.summary())
        return report


def evaluate(refs: Sequence[Text], hyps: Sequence[Text]) -> EvalReport:
    return CorpusScorer().score(refs, hyps)
