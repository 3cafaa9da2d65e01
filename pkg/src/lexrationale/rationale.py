"""Rationale detectors: document-level baseline, snippet model, iterative snippet model.

A rationale is an ``N``-token snippet that explains why a document was
classified responsive.  Lacking snippet labels, the snippet methods bootstrap
a snippet-level training set from a document-level classifier: high-scoring
snippets of responsive training documents become positives and random
snippets of nonresponsive documents become negatives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lexrationale._parallel import ordered_map
from lexrationale.classifier import (
    DOCUMENT_LEVEL,
    ITERATIVE_SNIPPET,
    SNIPPET_MODEL,
    TrainConfig,
    TrainedModel,
    fit_pipeline,
)
from lexrationale.corpus import Corpus, Document
from lexrationale.tokenize import Snippet, TokenSeq, tokenize, window_snippets

log = logging.getLogger(__name__)

BASE_THRESHOLD = 0.5


class NoRationalesError(RuntimeError):
    """No responsive training snippet reached the base threshold."""

    def __init__(self, iteration: int, snippet_size: int):
        self.iteration = iteration
        self.snippet_size = snippet_size
        super().__init__(
            f"no training rationales found at iteration {iteration} (snippet size {snippet_size}): "
            f"no responsive snippet scored >= {BASE_THRESHOLD}"
        )


@dataclass(frozen=True)
class ScoredSnippet:
    snippet: Snippet
    score: float
    model_kind: str = DOCUMENT_LEVEL

    @property
    def doc_id(self) -> str:
        return self.snippet.doc_id

    @property
    def sort_key(self):
        """Descending score, then ``(doc_id, start, length)`` ascending."""
        s = self.snippet
        return (-self.score, s.doc_id, s.start, s.length)


@dataclass(frozen=True)
class SelectionConfig:
    min_score_th: float = 0.8
    max_num: int = 500
    base_th: float = BASE_THRESHOLD

    def __post_init__(self):
        if not 0.5 <= self.min_score_th < 1.0:
            raise ValueError(f"min_score_th must lie in [0.5, 1), got {self.min_score_th}")
        if self.max_num < 1:
            raise ValueError(f"max_num must be >= 1, got {self.max_num}")
        if self.base_th != BASE_THRESHOLD:
            raise ValueError("the base threshold is fixed at 0.5")


@dataclass(frozen=True)
class IterConfig:
    start_n: int = 1000
    min_n: int = 50

    def __post_init__(self):
        if not self.start_n >= self.min_n >= 2:
            raise ValueError(f"need start_n >= min_n >= 2, got {self.start_n}, {self.min_n}")
        if self.start_n % 2 or self.min_n % 2:
            raise ValueError("start_n and min_n must be even")

    def schedule(self) -> list[int]:
        """Snippet sizes visited: halve with flooring, clamp at ``min_n``, stop after ``min_n``."""
        sizes = []
        n = self.start_n
        while True:
            sizes.append(n)
            if n > self.min_n:
                n = max(self.min_n, n // 2)
            else:
                return sizes


@dataclass
class IterationRecord:
    """What one bootstrap round selected and trained on (for the audit file)."""

    iteration: int
    snippet_size: int
    n_scored: int
    n_phase1: int
    n_phase2: int
    n_nonresponsive: int
    selected: list[ScoredSnippet] = field(default_factory=list, repr=False)
    nonresponsive: list[Snippet] = field(default_factory=list, repr=False)
    max_num: int | None = None

    @property
    def exceeds_max_num(self) -> bool:
        """Phase 1 alone went over ``max_num`` (it is uncapped)."""
        return self.max_num is not None and self.n_phase1 > self.max_num


def tokenize_documents(docs: Iterable[Document]) -> list[TokenSeq]:
    """Tokenize, dropping (with a warning) documents that have no tokens."""
    seqs = []
    for doc in docs:
        seq = tokenize(doc.text, doc.id)
        if not seq.tokens:
            log.warning("skipping empty document %r", doc.id)
            continue
        seqs.append(seq)
    return seqs


def _as_seqs(docs) -> list[TokenSeq]:
    docs = list(docs)
    if docs and isinstance(docs[0], TokenSeq):
        return [s for s in docs if s.tokens]
    return tokenize_documents(docs)


def _score_seq(model: TrainedModel, seq: TokenSeq, size: int) -> list[ScoredSnippet]:
    snippets = window_snippets(seq, size, allow_odd=True)
    scores = model.score_units([s.tokens for s in snippets])
    return [ScoredSnippet(s, float(p), model.kind) for s, p in zip(snippets, scores)]


def score_all_snippets(model: TrainedModel, docs, snippet_size: int, threads: int = 1) -> list[ScoredSnippet]:
    """Score every ``snippet_size`` window of every nonempty document.

    ``docs`` may be documents or pre-tokenized sequences.  Output is ordered by
    ``(doc_id, start)``.
    """
    seqs = _as_seqs(docs)
    per_doc = ordered_map(lambda s: _score_seq(model, s, snippet_size), seqs, threads)
    out = [ss for chunk in per_doc for ss in chunk]
    out.sort(key=lambda ss: (ss.snippet.doc_id, ss.snippet.start, ss.snippet.length))
    return out


def selection_phases(
    scored: Sequence[ScoredSnippet], cfg: SelectionConfig = SelectionConfig()
) -> tuple[list[ScoredSnippet], list[ScoredSnippet]]:
    """Run the two selection passes and return ``(phase1, phase2)``.

    Phase 1 walks snippets by descending score and keeps the first snippet of
    each document scoring at least 0.5, i.e. every qualifying document's best
    snippet.  Phase 2 walks again and adds any unselected snippet scoring at
    least ``min_score_th`` while the running count is at most ``max_num``.
    Phase 1 is not capped.
    """
    ranked = sorted(scored, key=lambda s: s.sort_key)
    phase1: list[ScoredSnippet] = []
    chosen: set = set()
    docs: set[str] = set()
    for s in ranked:
        if s.score >= cfg.base_th and s.doc_id not in docs:
            phase1.append(s)
            chosen.add(s.snippet.key)
            docs.add(s.doc_id)
    count = len(phase1)
    phase2: list[ScoredSnippet] = []
    for s in ranked:
        if s.snippet.key not in chosen and s.score >= cfg.min_score_th and count <= cfg.max_num:
            phase2.append(s)
            chosen.add(s.snippet.key)
            count += 1
    return phase1, phase2


def select_responsive_snippets(
    scored: Sequence[ScoredSnippet], cfg: SelectionConfig = SelectionConfig()
) -> list[ScoredSnippet]:
    """Responsive training snippets: per-document maxima first, then extra high scorers."""
    phase1, phase2 = selection_phases(scored, cfg)
    if len(phase1) > cfg.max_num:
        log.warning("phase-1 selection alone (%d snippets) exceeds max_num=%d", len(phase1), cfg.max_num)
    return phase1 + phase2


def sample_snippets(pool: Sequence[Snippet], count: int, seed: int, stream: int = 0) -> list[Snippet]:
    """Uniform sample without replacement, returned in pool order."""
    if not pool:
        raise ValueError("cannot sample from an empty snippet pool")
    if count >= len(pool):
        return list(pool)
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, stream])
    picked = np.sort(rng.choice(len(pool), size=count, replace=False))
    return [pool[i] for i in picked]


def nonresponsive_pool(docs, snippet_size: int) -> list[Snippet]:
    return [s for seq in _as_seqs(docs) for s in window_snippets(seq, snippet_size, allow_odd=True)]


def sample_nonresponsive_snippets(
    nonresp_docs, snippet_size: int, count: int, seed: int, stream: int = 0
) -> list[Snippet]:
    """Pool all ``snippet_size`` windows of the nonresponsive documents and sample ``count``."""
    pool = nonresponsive_pool(nonresp_docs, snippet_size)
    if not pool:
        raise ValueError("nonresponsive documents yield no snippets")
    return sample_snippets(pool, count, seed, stream)


def train_document_model(train: Corpus, config: TrainConfig = TrainConfig()) -> TrainedModel:
    """Document-level baseline: the classifier trained on whole documents."""
    resp = tokenize_documents(train.responsive())
    nonresp = tokenize_documents(train.nonresponsive())
    if not resp or not nonresp:
        raise ValueError("training corpus needs nonempty documents of both classes")
    model = fit_pipeline([s.tokens for s in resp], [s.tokens for s in nonresp], config)
    return model.with_provenance(kind=DOCUMENT_LEVEL, snippet_size=None)


def _bootstrap_round(
    model: TrainedModel,
    resp: list[TokenSeq],
    nonresp: list[TokenSeq],
    size: int,
    iteration: int,
    selection: SelectionConfig,
    config: TrainConfig,
    seed: int,
    nonresp_count: int | None,
    threads: int,
) -> tuple[TrainedModel, IterationRecord]:
    scored = score_all_snippets(model, resp, size, threads)
    phase1, phase2 = selection_phases(scored, selection)
    selected = phase1 + phase2
    if not selected:
        raise NoRationalesError(iteration, size)
    if len(phase1) > selection.max_num:
        log.warning("iteration %d: phase-1 selection (%d) exceeds max_num=%d", iteration, len(phase1), selection.max_num)
    count = len(selected) if nonresp_count is None else nonresp_count
    negatives = sample_nonresponsive_snippets(nonresp, size, count, seed, stream=iteration)
    new_model = fit_pipeline([s.snippet.tokens for s in selected], [s.tokens for s in negatives], config)
    record = IterationRecord(
        iteration, size, len(scored), len(phase1), len(phase2), len(negatives), selected, negatives,
        max_num=selection.max_num,
    )
    log.info("iteration %d (N=%d): %d scored, %d+%d selected, %d nonresponsive",
             iteration, size, len(scored), len(phase1), len(phase2), len(negatives))
    return new_model, record


def train_snippet_method(
    train: Corpus,
    snippet_size: int = 50,
    selection: SelectionConfig = SelectionConfig(),
    config: TrainConfig = TrainConfig(),
    *,
    doc_model: TrainedModel | None = None,
    seed: int | None = None,
    nonresp_count: int | None = None,
    threads: int = 1,
    trace: list | None = None,
) -> TrainedModel:
    """Snippet model: one bootstrap round from the document-level model.

    ``doc_model`` skips retraining the baseline when one is already at hand.
    Bootstrap records are appended to ``trace`` when given.
    """
    if snippet_size < 2 or snippet_size % 2:
        raise ValueError(f"snippet size must be an even integer >= 2, got {snippet_size}")
    seed = config.seed if seed is None else seed
    if doc_model is None:
        doc_model = train_document_model(train, config)
    resp = tokenize_documents(train.responsive())
    nonresp = tokenize_documents(train.nonresponsive())
    model, record = _bootstrap_round(
        doc_model, resp, nonresp, snippet_size, 0, selection, config, seed, nonresp_count, threads
    )
    if trace is not None:
        trace.append(record)
    return model.with_provenance(kind=SNIPPET_MODEL, snippet_size=snippet_size, schedule=(snippet_size,))


def train_iterative_method(
    train: Corpus,
    iteration: IterConfig = IterConfig(),
    selection: SelectionConfig = SelectionConfig(),
    config: TrainConfig = TrainConfig(),
    *,
    doc_model: TrainedModel | None = None,
    seed: int | None = None,
    nonresp_count: int | None = None,
    threads: int = 1,
    trace: list | None = None,
) -> TrainedModel:
    """Iterative snippet model: repeat the bootstrap with halving snippet sizes.

    Each round scores snippets with the previous round's model, so the first
    round matches :func:`train_snippet_method` at ``iteration.start_n``.
    Nonresponsive snippets are re-sampled every round.
    """
    seed = config.seed if seed is None else seed
    model = doc_model if doc_model is not None else train_document_model(train, config)
    resp = tokenize_documents(train.responsive())
    nonresp = tokenize_documents(train.nonresponsive())
    schedule = iteration.schedule()
    for i, size in enumerate(schedule):
        model, record = _bootstrap_round(
            model, resp, nonresp, size, i, selection, config, seed, nonresp_count, threads
        )
        if trace is not None:
            trace.append(record)
    return model.with_provenance(kind=ITERATIVE_SNIPPET, snippet_size=schedule[-1], schedule=tuple(schedule))


def rank_rationales(
    doc: Document, rationale_model: TrainedModel, doc_model: TrainedModel, snippet_size: int = 50
) -> list[ScoredSnippet]:
    """All snippets of ``doc`` ranked by ``rationale_model``, best first.

    Documents the document-level model does not call responsive get no
    rationales (empty list).
    """
    seq = tokenize(doc.text, doc.id)
    if not seq.tokens:
        return []
    if doc_model.score_units([seq.tokens])[0] < BASE_THRESHOLD:
        return []
    scored = _score_seq(rationale_model, seq, snippet_size)
    scored.sort(key=lambda s: (-s.score, s.snippet.start))
    return scored


def write_selection_audit(records: Sequence[IterationRecord], path: str | Path) -> None:
    """One JSON line per selected responsive training snippet."""
    lines = []
    for rec in records:
        for s in rec.selected:
            lines.append(json.dumps({
                "iteration": rec.iteration,
                "snippet_size": rec.snippet_size,
                "docId": s.snippet.doc_id,
                "start": s.snippet.start,
                "length": s.snippet.length,
                "score": s.score,
            }))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
