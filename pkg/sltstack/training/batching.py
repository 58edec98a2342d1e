"""
Batching
Length-sorted greedy batching and padding of encoded examples
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..tasks.corpus import ParallelExample
from ..tasks.tokenize import tokenize
from ..tasks.vocabulary import PAD_ID, SOS_ID, Vocabulary


@dataclass(frozen=True)
class EncodedExample:
    """
    Model-ready example

    ``inputs`` holds (T, F) features or source ids; ``target`` and the
    optional ``aux_target`` (the ASR transcript of a joint example) end in eos.
    """

    uid: str
    inputs: np.ndarray
    target: np.ndarray
    aux_target: Optional[np.ndarray] = None

    @property
    def target_units(self) -> int:
        if self.aux_target is None:
            return len(self.target)
        return max(len(self.target), len(self.aux_target))


@dataclass
class Batch:
    indices: List[int]
    inputs: np.ndarray
    input_lengths: np.ndarray
    decoder_in: np.ndarray
    targets: np.ndarray
    aux_decoder_in: Optional[np.ndarray] = None
    aux_targets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.indices)


def encode_examples(
    examples: Sequence[ParallelExample],
    output_vocab: Vocabulary,
    input_vocab: Optional[Vocabulary] = None,
    output_field: str = "target",
    aux_vocab: Optional[Vocabulary] = None,
) -> List[EncodedExample]:
    """
    Tokenize a corpus for one model role

    Args:
        examples: Parallel examples
        output_vocab: Vocabulary of the decoder output
        input_vocab: Source vocabulary for text input; None uses the features
        output_field: "target" (translation) or "source" (transcript)
        aux_vocab: Transcript vocabulary of joint examples

    Returns:
        List of EncodedExample in corpus order
    """
    encoded = []
    for ex in examples:
        if input_vocab is None:
            if ex.features is None:
                raise ValueError(f"example {ex.uid} has no features")
            inputs = ex.features.frames
        else:
            inputs = np.array(tokenize(ex.source_text, input_vocab).ids, dtype=np.int64)
        text = ex.target_text if output_field == "target" else ex.source_text
        target = np.array(tokenize(text, output_vocab).ids, dtype=np.int64)
        aux = np.array(tokenize(ex.source_text, aux_vocab).ids, dtype=np.int64) if aux_vocab is not None else None
        encoded.append(EncodedExample(ex.uid, inputs, target, aux))
    return encoded


def make_batches(target_lengths: Sequence[int], batch_target_units: int) -> List[List[int]]:
    """
    Group example indices so each padded batch fits the target-unit budget

    Examples are visited shortest first (ties by index); one joins the open
    batch while batch_size * max_length, pads included, stays within the
    budget.

    Args:
        target_lengths: Target length of every example
        batch_target_units: Budget of padded target tokens per batch

    Returns:
        List of index lists; every index appears exactly once
    """
    oversized = [i for i, n in enumerate(target_lengths) if n > batch_target_units]
    if oversized:
        i = oversized[0]
        raise ValueError(f"example {i} has {target_lengths[i]} target units, over the batch budget {batch_target_units}")

    order = sorted(range(len(target_lengths)), key=lambda i: (target_lengths[i], i))
    batches: List[List[int]] = []
    current: List[int] = []
    longest = 0
    for i in order:
        n = target_lengths[i]
        if current and (len(current) + 1) * max(longest, n) > batch_target_units:
            batches.append(current)
            current, longest = [], 0
        current.append(i)
        longest = max(longest, n)
    if current:
        batches.append(current)
    return batches


def _pad(arrays: Sequence[np.ndarray], value, dtype) -> np.ndarray:
    longest = max(len(a) for a in arrays)
    out = np.full((len(arrays), longest) + arrays[0].shape[1:], value, dtype=dtype)
    for row, a in enumerate(arrays):
        out[row, :len(a)] = a
    return out


def _teacher_forcing(targets: Sequence[np.ndarray]):
    dec_in = [np.concatenate([[SOS_ID], t[:-1]]) for t in targets]
    return _pad(dec_in, PAD_ID, np.int64), _pad(targets, PAD_ID, np.int64)


def collate(examples: Sequence[EncodedExample], indices: Sequence[int]) -> Batch:
    """Pad the selected examples; features pad with zeros, ids with pad"""
    chosen = [examples[i] for i in indices]
    first = chosen[0].inputs
    if np.issubdtype(first.dtype, np.floating):
        inputs = _pad([ex.inputs for ex in chosen], 0.0, np.float32)
    else:
        inputs = _pad([ex.inputs for ex in chosen], PAD_ID, np.int64)
    lengths = np.array([len(ex.inputs) for ex in chosen], dtype=np.int64)
    decoder_in, targets = _teacher_forcing([ex.target for ex in chosen])
    batch = Batch(list(indices), inputs, lengths, decoder_in, targets)
    if chosen[0].aux_target is not None:
        batch.aux_decoder_in, batch.aux_targets = _teacher_forcing([ex.aux_target for ex in chosen])
    return batch


def batch_corpus(examples: Sequence[EncodedExample], batch_target_units: int) -> List[Batch]:
    groups = make_batches([ex.target_units for ex in examples], batch_target_units)
    return [collate(examples, group) for group in groups]
