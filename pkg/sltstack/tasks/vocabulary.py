"""
Vocabulary
Token inventories with fixed reserved ids and validated token sequences
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

PAD_ID = 0
UNK_ID = 1
SOS_ID = 2
EOS_ID = 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<sos>", "<eos>")


class Vocabulary:
    """
    Ordered, unique token strings mapped to dense ids.

    Ids 0..3 are always pad, unk, sos and eos; regular tokens follow in the
    order given.
    """

    def __init__(self, tokens: Iterable[str], mode: str = "char"):
        self.mode = mode
        self.tokens: List[str] = list(RESERVED_TOKENS)
        self._index: Dict[str, int] = {tok: i for i, tok in enumerate(self.tokens)}
        for token in tokens:
            if token not in self._index:
                self._index[token] = len(self.tokens)
                self.tokens.append(token)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.mode == other.mode and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash((self.mode, tuple(self.tokens)))

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise ValueError(f"token id {token_id} outside vocabulary of size {len(self.tokens)}")
        return self.tokens[token_id]

    def to_dict(self) -> Dict:
        return {"mode": self.mode, "tokens": self.tokens[len(RESERVED_TOKENS):]}

    @classmethod
    def from_dict(cls, data: Dict) -> "Vocabulary":
        return cls(data["tokens"], mode=data.get("mode", "char"))


@dataclass(frozen=True)
class TokenSequence:
    """Token ids over a vocabulary; eos may only appear last"""

    ids: Tuple[int, ...]
    vocabulary: Vocabulary

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        size = len(self.vocabulary)
        for position, token_id in enumerate(self.ids):
            if not 0 <= token_id < size:
                raise ValueError(f"token id {token_id} at position {position} outside vocabulary of size {size}")
        if EOS_ID in self.ids[:-1]:
            raise ValueError(f"interior eos at position {self.ids.index(EOS_ID)}")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def tokens(self) -> List[str]:
        return [self.vocabulary.token_of(i) for i in self.ids]

    @property
    def ends_with_eos(self) -> bool:
        return bool(self.ids) and self.ids[-1] == EOS_ID

    def without_eos(self) -> Sequence[int]:
        return self.ids[:-1] if self.ends_with_eos else self.ids
