"""
Tokenization
Character, toy-subword and word tokenizers over a committed merge table
"""

import json
import re
import unicodedata
from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .vocabulary import EOS_ID, RESERVED_TOKENS, TokenSequence, Vocabulary

Merge = Tuple[str, str]
MERGES_PATH = Path(__file__).with_name("merges.json")
MODES = ("char", "subword", "word")


@lru_cache(maxsize=1)
def default_merges() -> Tuple[Merge, ...]:
    """The committed merge table, in application order"""
    with open(MERGES_PATH, "r", encoding="utf-8") as f:
        return tuple((left, right) for left, right in json.load(f))


def normalize_text(text: str) -> str:
    """Lower-case, drop punctuation and collapse whitespace"""
    lowered = text.lower()
    stripped = "".join(ch for ch in lowered if not unicodedata.category(ch).startswith("P"))
    return re.sub(r"\s+", " ", stripped).strip()


def apply_merges(symbols: Sequence[str], merges: Iterable[Merge]) -> List[str]:
    """Apply each merge, in table order, left to right over adjacent pairs"""
    pieces = list(symbols)
    for left, right in merges:
        if len(pieces) < 2:
            break
        merged: List[str] = []
        i = 0
        while i < len(pieces):
            if i + 1 < len(pieces) and pieces[i] == left and pieces[i + 1] == right:
                merged.append(left + right)
                i += 2
            else:
                merged.append(pieces[i])
                i += 1
        pieces = merged
    return pieces


def split_tokens(text: str, mode: str, merges: Optional[Sequence[Merge]] = None) -> List[str]:
    if mode == "char":
        return list(text)
    if mode == "subword":
        return apply_merges(list(text), default_merges() if merges is None else merges)
    if mode == "word":
        return text.split()
    raise ValueError(f"unknown tokenization mode {mode!r}; expected one of {MODES}")


def build_vocabulary(mode: str, texts: Iterable[str], merges: Optional[Sequence[Merge]] = None) -> Vocabulary:
    """
    Vocabulary covering every token the texts produce

    Subword vocabularies also hold every merge product so unseen
    combinations of known characters still tokenize without unk.
    """
    texts = list(texts)
    if mode == "subword":
        merges = default_merges() if merges is None else merges
        chars = sorted({ch for text in texts for ch in text})
        products = [left + right for left, right in merges]
        return Vocabulary(chars + products, mode=mode)
    return Vocabulary(sorted({tok for text in texts for tok in split_tokens(text, mode)}), mode=mode)


def tokenize(text: str, vocabulary: Vocabulary, merges: Optional[Sequence[Merge]] = None) -> TokenSequence:
    """
    Split text in the vocabulary's mode and map it to ids, eos appended

    Args:
        text: Non-empty input string
        vocabulary: Target vocabulary; its ``mode`` picks the splitter
        merges: Merge table for subword mode (defaults to the committed table)

    Returns:
        TokenSequence: ids ending in eos; unknown tokens map to unk
    """
    if not text:
        raise ValueError("cannot tokenize empty text")
    ids = [vocabulary.id_of(tok) for tok in split_tokens(text, vocabulary.mode, merges)]
    return TokenSequence(tuple(ids) + (EOS_ID,), vocabulary)


def detokenize(tokens: TokenSequence) -> str:
    """Inverse of ``tokenize``: drop reserved tokens and join the rest"""
    pieces = [tok for tok in tokens.tokens if tok not in RESERVED_TOKENS]
    return " ".join(pieces) if tokens.vocabulary.mode == "word" else "".join(pieces)


def ids_to_text(ids: Sequence[int], vocabulary: Vocabulary) -> str:
    """Detokenize raw decoder output, stopping at the first eos"""
    ids = list(ids)
    if EOS_ID in ids:
        ids = ids[:ids.index(EOS_ID)]
    return detokenize(TokenSequence(tuple(ids), vocabulary))
