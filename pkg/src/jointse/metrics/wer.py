"""Word error rate from externally produced hypothesis transcripts."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import MetricError

_NON_WORD = re.compile(r"[^\w\s']")
_LOOSE_APOSTROPHE = re.compile(r"(?<!\w)'|'(?!\w)")


def normalize(text: str | Sequence[str]) -> tuple[str, ...]:
    """Lowercase, drop punctuation except intra-word apostrophes, split on whitespace."""
    if not isinstance(text, str):
        text = " ".join(text)
    text = _NON_WORD.sub(" ", text.lower())
    text = _LOOSE_APOSTROPHE.sub(" ", text)
    return tuple(text.split())


@dataclass(frozen=True)
class TranscriptPair:
    reference: tuple[str, ...]
    hypothesis: tuple[str, ...]

    @classmethod
    def from_text(cls, reference: str | Sequence[str], hypothesis: str | Sequence[str]) -> TranscriptPair:
        return cls(normalize(reference), normalize(hypothesis))


# (S, D, I) counts packed into one int so the inner loop only does integer adds
_S, _D, _I = 1, 1 << 20, 1 << 40
_MASK = (1 << 20) - 1


def edit_ops(ref: Sequence[str], hyp: Sequence[str]) -> tuple[int, int, int]:
    """Minimum-cost (substitutions, deletions, insertions) with unit costs."""
    m = len(hyp)
    cost = list(range(m + 1))
    ops = [j * _I for j in range(m + 1)]
    for i, word in enumerate(ref, 1):
        prev_cost, prev_ops = cost, ops
        cost = [i] + [0] * m
        ops = [i * _D] + [0] * m
        for j in range(1, m + 1):
            if word == hyp[j - 1]:
                best, op = prev_cost[j - 1], prev_ops[j - 1]
            else:
                best, op = prev_cost[j - 1] + 1, prev_ops[j - 1] + _S
            c = prev_cost[j] + 1
            if c < best:
                best, op = c, prev_ops[j] + _D
            c = cost[j - 1] + 1
            if c < best:
                best, op = c, ops[j - 1] + _I
            cost[j] = best
            ops[j] = op
    op = ops[m]
    return op & _MASK, (op >> 20) & _MASK, op >> 40


def wer(pair: TranscriptPair) -> float:
    if not pair.reference:
        raise MetricError("WER is undefined for an empty reference")
    return sum(edit_ops(pair.reference, pair.hypothesis)) / len(pair.reference)


def read_transcripts(path: str | Path) -> dict[str, str]:
    """Parse ``utterance_id<TAB>transcript`` lines (UTF-8)."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise MetricError(f"{path}:{lineno}: expected 'id<TAB>transcript'")
        utt, text = line.split("\t", 1)
        out[utt.strip()] = text.strip()
    return out
