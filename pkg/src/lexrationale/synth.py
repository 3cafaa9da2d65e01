"""Synthetic labeled corpora with planted rationale passages.

Nonresponsive documents are Zipf-distributed background words.  Responsive
documents are the same kind of background text with one or more planted
passages in which each token is a topic word with probability
``signal_strength``.  The planted spans are returned as ground truth so that
rationale detectors can be scored against something real.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from lexrationale.corpus import Corpus, Document, Label

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class GenConfig:
    n_resp: int = 200
    n_nonresp: int = 600
    doc_length: tuple[int, int] = (300, 800)
    plant_length: int = 50
    plants_per_resp_doc: tuple[int, int] = (1, 1)
    background_vocab: int = 3000
    topic_vocab: int = 150
    signal_strength: float = 1.0
    # probability that a background position draws a topic word instead
    vocab_overlap: float = 0.0
    zipf_exponent: float = 1.1
    id_prefix: str = "doc"
    seed: int = 0
    # word lists depend only on this, so train and test corpora can share them
    vocab_seed: int = 0

    def validate(self) -> None:
        lo, hi = self.doc_length
        pmin, pmax = self.plants_per_resp_doc
        if self.n_resp < 0 or self.n_nonresp < 0:
            raise ValueError("document counts must be non-negative")
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid doc_length range {self.doc_length}")
        if self.plant_length < 1:
            raise ValueError("plant_length must be positive")
        if not 1 <= pmin <= pmax <= 3:
            raise ValueError(f"plants_per_resp_doc must lie within 1..3, got {self.plants_per_resp_doc}")
        if self.n_resp and pmax * self.plant_length > lo:
            raise ValueError(
                f"infeasible config: {pmax} plants of {self.plant_length} tokens do not fit a {lo}-token document"
            )
        if not 0.0 < self.signal_strength <= 1.0:
            raise ValueError("signal_strength must lie in (0, 1]")
        if not 0.0 <= self.vocab_overlap < 1.0:
            raise ValueError("vocab_overlap must lie in [0, 1)")
        if self.background_vocab < 1 or self.topic_vocab < 1:
            raise ValueError("vocabulary sizes must be positive")


@dataclass(frozen=True)
class GroundTruth:
    spans: Mapping[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.spans

    def __getitem__(self, doc_id: str) -> tuple[tuple[int, int], ...]:
        return self.spans[doc_id]


@dataclass(frozen=True)
class Vocabulary:
    background: tuple[str, ...]
    topic: tuple[str, ...]


def build_vocabularies(cfg: GenConfig) -> Vocabulary:
    """Disjoint background and topic word lists, deterministic in ``cfg.vocab_seed``."""
    rng = np.random.default_rng([cfg.vocab_seed, 0])
    needed = cfg.background_vocab + cfg.topic_vocab
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < needed:
        n_syl = int(rng.integers(2, 5))
        word = "".join(
            _CONSONANTS[int(rng.integers(len(_CONSONANTS)))] + _VOWELS[int(rng.integers(len(_VOWELS)))]
            for _ in range(n_syl)
        )
        if word not in seen:
            seen.add(word)
            words.append(word)
    return Vocabulary(tuple(words[: cfg.background_vocab]), tuple(words[cfg.background_vocab :]))


def _zipf_probs(n: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1) ** exponent
    return weights / weights.sum()


def _plant_starts(rng: np.random.Generator, length: int, n_plants: int, plant_length: int) -> list[int]:
    free = length - n_plants * plant_length
    offsets = np.sort(rng.integers(0, free + 1, size=n_plants))
    return [int(off) + i * plant_length for i, off in enumerate(offsets)]


def _to_text(rng: np.random.Generator, words: Sequence[str]) -> str:
    out: list[str] = []
    i = 0
    while i < len(words):
        n = int(rng.integers(8, 21))
        sentence = list(words[i : i + n])
        sentence[0] = sentence[0].capitalize()
        out.append(" ".join(sentence) + ".")
        i += n
    return " ".join(out)


def _generate_doc(cfg: GenConfig, vocab: Vocabulary, probs, index: int, responsive: bool):
    rng = np.random.default_rng([cfg.seed, 1, index])
    bg_probs, topic_probs = probs
    lo, hi = cfg.doc_length
    length = int(rng.integers(lo, hi + 1))
    bg = rng.choice(len(vocab.background), size=length, p=bg_probs)
    words = [vocab.background[i] for i in bg]
    if cfg.vocab_overlap > 0:
        leak = rng.random(length) < cfg.vocab_overlap
        leaked = rng.choice(len(vocab.topic), size=length, p=topic_probs)
        for pos in np.flatnonzero(leak):
            words[pos] = vocab.topic[leaked[pos]]
    spans: list[tuple[int, int]] = []
    if responsive:
        pmin, pmax = cfg.plants_per_resp_doc
        n_plants = int(rng.integers(pmin, pmax + 1))
        for start in _plant_starts(rng, length, n_plants, cfg.plant_length):
            is_topic = rng.random(cfg.plant_length) < cfg.signal_strength
            topic = rng.choice(len(vocab.topic), size=cfg.plant_length, p=topic_probs)
            for j in range(cfg.plant_length):
                if is_topic[j]:
                    words[start + j] = vocab.topic[topic[j]]
            spans.append((start, cfg.plant_length))
    return words, spans, _to_text(rng, words)


def generate(cfg: GenConfig) -> tuple[Corpus, GroundTruth]:
    """Generate ``cfg.n_resp`` responsive then ``cfg.n_nonresp`` nonresponsive documents."""
    cfg.validate()
    vocab = build_vocabularies(cfg)
    probs = (_zipf_probs(cfg.background_vocab, cfg.zipf_exponent), _zipf_probs(cfg.topic_vocab, cfg.zipf_exponent))
    docs = []
    truth: dict[str, tuple[tuple[int, int], ...]] = {}
    width = len(str(max(cfg.n_resp + cfg.n_nonresp - 1, 0)))
    for i in range(cfg.n_resp + cfg.n_nonresp):
        responsive = i < cfg.n_resp
        _, spans, text = _generate_doc(cfg, vocab, probs, i, responsive)
        doc_id = f"{cfg.id_prefix}-{i:0{width}d}"
        docs.append(Document(doc_id, text, Label.RESPONSIVE if responsive else Label.NONRESPONSIVE))
        if responsive:
            truth[doc_id] = tuple(spans)
    return Corpus(tuple(docs)), GroundTruth(truth)


def save_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    lines = [
        json.dumps({"id": doc_id, "start": start, "length": length})
        for doc_id, spans in truth.spans.items()
        for start, length in spans
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_ground_truth(path: str | Path) -> GroundTruth:
    spans: dict[str, list[tuple[int, int]]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                spans.setdefault(rec["id"], []).append((int(rec["start"]), int(rec["length"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise ValueError(f"{path}: malformed ground-truth record on line {lineno}") from None
    return GroundTruth({k: tuple(v) for k, v in spans.items()})


def span_overlap(a_start: int, a_len: int, b_start: int, b_len: int) -> int:
    return max(0, min(a_start + a_len, b_start + b_len) - max(a_start, b_start))


def rationale_recall(ranked: Sequence, truth: GroundTruth, top_k: int, doc_id: str | None = None) -> float:
    """Fraction of a document's planted spans hit by one of the top ``top_k`` snippets.

    A span counts as hit when some snippet overlaps at least half of it.
    ``ranked`` holds snippets (or scored snippets) of a single document, best
    first; pass ``doc_id`` when the ranking may be empty.
    """
    snippets = [getattr(r, "snippet", r) for r in ranked]
    ids = {s.doc_id for s in snippets}
    if doc_id is None:
        if not ids:
            raise ValueError("empty ranking: pass doc_id explicitly")
        if len(ids) > 1:
            raise ValueError("ranking covers more than one document")
        doc_id = ids.pop()
    elif ids - {doc_id}:
        raise ValueError("ranking covers more than one document")
    if doc_id not in truth:
        raise KeyError(f"document {doc_id!r} has no ground truth")
    spans = truth[doc_id]
    if not spans:
        raise ValueError(f"document {doc_id!r} has no planted spans")
    top = snippets[:top_k]
    hits = sum(
        1
        for start, length in spans
        if any(2 * span_overlap(start, length, s.start, s.length) >= length for s in top)
    )
    return hits / len(spans)
