"""
Error Rates
Levenshtein alignment counts and corpus-level WER / CER
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

Text = Union[str, Sequence[str]]


@dataclass(frozen=True)
class ErrorCounts:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_len: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        """Errors per reference token, as a percentage"""
        if self.ref_len == 0:
            raise ValueError("error rate is undefined for an empty reference")
        return 100.0 * self.errors / self.ref_len

    def __add__(self, other: "ErrorCounts") -> "ErrorCounts":
        return ErrorCounts(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.ref_len + other.ref_len,
        )


def word_tokens(text: Text) -> List[str]:
    return text.split() if isinstance(text, str) else list(text)


def char_tokens(text: Text) -> List[str]:
    """Characters of the detokenized string, spaces included"""
    return list(text if isinstance(text, str) else " ".join(text))


def edit_distance_alignment(ref: Sequence, hyp: Sequence) -> Tuple[int, int, int]:
    """
    Minimal unit-cost alignment of ``hyp`` against ``ref``

    Ties in the backtrace go to the diagonal (match or substitution), then
    insertion, then deletion.

    Args:
        ref: Reference tokens
        hyp: Hypothesis tokens

    Returns:
        Tuple: (substitutions, insertions, deletions)
    """
    ref, hyp = list(ref), list(hyp)
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diagonal = cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            cost[i, j] = min(diagonal, cost[i, j - 1] + 1, cost[i - 1, j] + 1)

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            mismatch = int(ref[i - 1] != hyp[j - 1])
            if cost[i, j] == cost[i - 1, j - 1] + mismatch:
                subs += mismatch
                i, j = i - 1, j - 1
                continue
        if j > 0 and cost[i, j] == cost[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return subs, ins, dels


def error_counts(refs: Sequence[Text], hyps: Sequence[Text], unit: str = "word") -> ErrorCounts:
    """Corpus-aggregated alignment counts over word or character tokens"""
    if len(refs) != len(hyps):
        raise ValueError(f"unequal number of references and hypotheses: {len(refs)} and {len(hyps)}")
    if unit not in ("word", "char"):
        raise ValueError(f"unit must be 'word' or 'char', got {unit!r}")
    split = word_tokens if unit == "word" else char_tokens
    total = ErrorCounts()
    for ref, hyp in zip(refs, hyps):
        ref_tokens = split(ref)
        s, i, d = edit_distance_alignment(ref_tokens, split(hyp))
        total = total + ErrorCounts(s, i, d, len(ref_tokens))
    return total


def wer(refs: Sequence[Text], hyps: Sequence[Text]) -> float:
    return error_counts(refs, hyps, "word").rate


def cer(refs: Sequence[Text], hyps: Sequence[Text]) -> float:
    return error_counts(refs, hyps, "char").rate
