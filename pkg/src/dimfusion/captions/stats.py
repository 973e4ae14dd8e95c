"""Corpus-level token statistics over flattened captions."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .schema import StructuredCaption, flatten


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class CorpusStats:
    avg: float
    median: float
    std_dev: float
    min: int
    max: int


_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def default_tokenizer(text: str) -> int:
    """Token count splitting on whitespace, keeping punctuation as tokens."""
    return len(_TOKEN_RE.findall(text))


def stats_from_counts(counts: Sequence[int]) -> CorpusStats:
    if not counts:
        raise EmptyCorpus("token statistics need at least one caption")
    ordered = sorted(counts)
    n = len(ordered)
    avg = Fraction(sum(ordered), n)
    if n % 2:
        median = Fraction(ordered[n // 2])
    else:
        median = Fraction(ordered[n // 2 - 1] + ordered[n // 2], 2)
    var = sum((Fraction(c) - avg) ** 2 for c in ordered) / n
    return CorpusStats(
        avg=float(avg),
        median=float(median),
        std_dev=math.sqrt(var),
        min=ordered[0],
        max=ordered[-1],
    )


def token_stats(
    corpus: Iterable[StructuredCaption],
    tokenizer: Callable[[str], int] = default_tokenizer,
) -> CorpusStats:
    """Exact statistics of per-caption token counts of the flattened form."""
    counts = [tokenizer(flatten(c)) for c in corpus]
    return stats_from_counts(counts)
