"""
Scorers
Next-token distribution providers: models, fixed tables and softmax-averaged ensembles
"""

from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError
from ..numcore.tensor import Tensor, no_grad
from ..transformer.model import SeqModel
from .beam import StepOutput

Prefix = Tuple[int, ...]


class ModelScorer:
    """Scores prefixes with a SeqModel decoder over fixed encoder states"""

    def __init__(self, model: SeqModel, memory: Tensor, memory_mask: np.ndarray):
        self.model = model
        self.memory = memory
        self.memory_mask = np.asarray(memory_mask, dtype=bool)
        self.vocab_size = model.config.vocab_tgt

    @classmethod
    def for_input(cls, model: SeqModel, inputs: np.ndarray) -> "ModelScorer":
        """
        Encode one utterance

        Args:
            model: Speech or text model
            inputs: (T, F) features or (S,) source ids
        """
        model.eval()
        with no_grad():
            memory, mask = model.encode(np.asarray(inputs)[None])
        return cls(model, memory, mask)

    def score(self, prefixes: np.ndarray) -> StepOutput:
        probs, hidden = self.model.decode_step(self.memory, self.memory_mask, prefixes)
        return StepOutput(probs, hidden)


class TableScorer:
    """
    Scores prefixes from a lookup of distributions

    ``table`` maps the prefix without its leading sos to a probability
    vector, either as a mapping or as a callable.
    """

    def __init__(self, vocab_size: int, table: Union[Mapping[Prefix, Sequence[float]], Callable[[Prefix], Sequence[float]]]):
        self.vocab_size = vocab_size
        self._lookup = table if callable(table) else table.__getitem__

    def score(self, prefixes: np.ndarray) -> StepOutput:
        rows = [np.asarray(self._lookup(tuple(int(t) for t in prefix[1:])), dtype=np.float64) for prefix in prefixes]
        return StepOutput(np.stack(rows))


class EnsembleScorer:
    """
    Arithmetic mean of member distributions in probability space

    Decoder states come from the first member.
    """

    def __init__(self, members: Sequence, weights: Optional[Sequence[float]] = None):
        if not members:
            raise ConfigError("an ensemble needs at least one member")
        sizes = {m.vocab_size for m in members}
        if len(sizes) != 1:
            raise ConfigError(f"ensemble members disagree on the target vocabulary size: {sorted(sizes)}")
        self.members = list(members)
        self.vocab_size = self.members[0].vocab_size
        weights = np.ones(len(members)) if weights is None else np.asarray(weights, dtype=np.float64)
        self.weights = weights / weights.sum()

    def score(self, prefixes: np.ndarray) -> StepOutput:
        outputs = [m.score(prefixes) for m in self.members]
        probs = sum(w * np.asarray(out.probs, dtype=np.float64) for w, out in zip(self.weights, outputs))
        return StepOutput(probs, outputs[0].hidden)


def ensemble_scorer(models: Sequence[SeqModel], inputs: np.ndarray) -> EnsembleScorer:
    """Softmax-averaged ensemble of models decoding the same input"""
    sizes = {m.config.vocab_tgt for m in models}
    if len(sizes) != 1:
        raise ConfigError(f"ensemble members disagree on the target vocabulary size: {sorted(sizes)}")
    return EnsembleScorer([ModelScorer.for_input(m, inputs) for m in models])
