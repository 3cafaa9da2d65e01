"""Tokenization and overlapping fixed-size snippet windows."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

# letters and digits only; \w minus underscore
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    doc_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Snippet:
    """Window ``[start, start + length)`` of a document's token sequence."""

    doc_id: str
    start: int
    length: int
    tokens: tuple[str, ...] = field(default=(), repr=False, compare=False)

    @property
    def end(self) -> int:
        return self.start + self.length

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.length)


def tokenize(text: str, doc_id: str = "") -> TokenSeq:
    """Lowercase ``text`` and split it into maximal runs of letters/digits.

    >>> tokenize("Re: Q3 earnings—CALL me").tokens
    ('re', 'q3', 'earnings', 'call', 'me')
    """
    return TokenSeq(tuple(_TOKEN_RE.findall(text.lower())), doc_id)


def window_starts(length: int, size: int, allow_odd: bool = False) -> list[int]:
    """Start offsets of the windows emitted by :func:`window_snippets`."""
    if size < 2 or (size % 2 and not allow_odd):
        raise ValueError(f"snippet size must be an even integer >= 2, got {size}")
    if length <= 0:
        raise ValueError("cannot window an empty token sequence")
    if length <= size:
        return [0]
    stride = size // 2
    starts = list(range(0, length - size + 1, stride))
    if starts[-1] + size < length:
        starts.append(length - size)
    return starts


def window_snippets(seq: TokenSeq, size: int, allow_odd: bool = False) -> list[Snippet]:
    """Cut ``seq`` into windows of ``size`` tokens overlapping by ``size / 2``.

    If the last stride-aligned window would stop short of the end, one extra
    window anchored at ``len(seq) - size`` is emitted so every token is covered.
    Sequences no longer than ``size`` give a single whole-sequence snippet.

    Odd sizes are rejected unless ``allow_odd`` is set, in which case the
    stride is ``size // 2`` (the halving schedule can produce odd sizes).
    """
    tokens = seq.tokens
    starts = window_starts(len(tokens), size, allow_odd)
    width = min(size, len(tokens))
    return [Snippet(seq.doc_id, s, width, tokens[s : s + width]) for s in starts]


def snippet_tokens(seq: TokenSeq | Sequence[str], snippet: Snippet) -> tuple[str, ...]:
    tokens = seq.tokens if isinstance(seq, TokenSeq) else tuple(seq)
    return tokens[snippet.start : snippet.end]
