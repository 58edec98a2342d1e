"""
Parallel Decoding
Utterance-parallel decoding over read-only models
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from ..errors import DecodeError

logger = logging.getLogger(__name__)

Item = TypeVar("Item")
Result = TypeVar("Result")


def decode_corpus(
    decode_one: Callable[[Item], Result],
    items: Sequence[Item],
    workers: int = 1,
) -> List[Optional[Result]]:
    """
    Decode every item, results in input order

    Items whose decoding raises DecodeError or ValueError yield None and a
    warning.

    Args:
        decode_one: Decoder for a single item
        items: Inputs
        workers: Thread count; 1 decodes inline

    Returns:
        List aligned with ``items``
    """
    def guarded(index_item):
        index, item = index_item
        try:
            return decode_one(item)
        except (DecodeError, ValueError) as e:
            logger.warning("Decoding failed for item %d: %s", index, e)
            return None

    if workers <= 1:
        return [guarded(pair) for pair in enumerate(items)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, enumerate(items)))
