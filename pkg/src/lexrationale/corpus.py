"""Labeled document collections: loading, saving and stratified splitting."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class CorpusError(ValueError):
    """Raised for unreadable, malformed or inconsistent corpus input."""


class Label(str, enum.Enum):
    RESPONSIVE = "responsive"
    NONRESPONSIVE = "nonresponsive"

    @property
    def is_responsive(self) -> bool:
        return self is Label.RESPONSIVE


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: Label

    @property
    def responsive(self) -> bool:
        return self.label is Label.RESPONSIVE


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered collection of documents with unique ids."""

    documents: tuple[Document, ...] = ()

    def __post_init__(self):
        docs = tuple(self.documents)
        object.__setattr__(self, "documents", docs)
        seen = set()
        for doc in docs:
            if not doc.id:
                raise CorpusError("document id must be nonempty")
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def n_responsive(self) -> int:
        return sum(1 for d in self.documents if d.responsive)

    @property
    def n_nonresponsive(self) -> int:
        return len(self.documents) - self.n_responsive

    @property
    def counts(self) -> tuple[int, int]:
        return self.n_responsive, self.n_nonresponsive

    def responsive(self) -> list[Document]:
        return [d for d in self.documents if d.responsive]

    def nonresponsive(self) -> list[Document]:
        return [d for d in self.documents if not d.responsive]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]


@dataclass(frozen=True)
class Split:
    train: Corpus
    test: Corpus
    seed: int


def _parse_record(line: str, lineno: int) -> Document:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: malformed record ({exc.msg})") from None
    if not isinstance(record, dict):
        raise CorpusError(f"line {lineno}: record must be an object")
    for field in ("id", "text", "label"):
        if field not in record:
            raise CorpusError(f"line {lineno}: missing field {field!r}")
        if not isinstance(record[field], str):
            raise CorpusError(f"line {lineno}: field {field!r} must be a string")
    try:
        label = Label(record["label"])
    except ValueError:
        raise CorpusError(f"line {lineno}: unknown label {record['label']!r}") from None
    if not record["id"]:
        raise CorpusError(f"line {lineno}: empty id")
    return Document(record["id"], record["text"], label)


def load_corpus(path: str | Path) -> Corpus:
    """Read a newline-delimited JSON corpus (fields ``id``, ``text``, ``label``).

    Blank lines are ignored.  Errors name the offending line number.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    docs = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            doc = _parse_record(line, lineno)
            if doc.id in seen:
                raise CorpusError(
                    f"line {lineno}: duplicate document id {doc.id!r} (first seen on line {seen[doc.id]})"
                )
            seen[doc.id] = lineno
            docs.append(doc)
    return Corpus(tuple(docs))


def dump_corpus_lines(documents: Iterable[Document]) -> str:
    lines = [
        json.dumps({"id": d.id, "text": d.text, "label": d.label.value}, ensure_ascii=False)
        for d in documents
    ]
    return "".join(line + "\n" for line in lines)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dump_corpus_lines(corpus.documents), encoding="utf-8")


def split_corpus(corpus: Corpus, train_fraction: float, seed: int) -> Split:
    """Stratified train/test split.

    Each label class is shuffled with its own stream derived from ``seed`` and
    ``floor(train_fraction * n_class)`` documents go to training.  Both halves
    keep the source corpus order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError(f"train fraction must lie in (0, 1), got {train_fraction}")
    train_ids: set[str] = set()
    for cls_index, label in enumerate((Label.RESPONSIVE, Label.NONRESPONSIVE)):
        members = [d.id for d in corpus.documents if d.label is label]
        if len(members) < 2:
            raise CorpusError(f"label {label.value!r} has {len(members)} documents; at least 2 required")
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, cls_index])
        order = rng.permutation(len(members))
        n_train = int(np.floor(train_fraction * len(members)))
        train_ids.update(members[i] for i in order[:n_train])
    train = tuple(d for d in corpus.documents if d.id in train_ids)
    test = tuple(d for d in corpus.documents if d.id not in train_ids)
    return Split(Corpus(train), Corpus(test), seed)


def merge(corpora: Sequence[Corpus]) -> Corpus:
    return Corpus(tuple(d for c in corpora for d in c.documents))
