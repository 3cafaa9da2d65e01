"""Label-free rationale evaluation by score reduction.

For each responsive test document that the document-level model calls
responsive, the rationale model scores every snippet.  The document is
assigned to the bucket holding its largest snippet score, every snippet whose
score falls in that bucket is deleted, and the document-level model rescores
what is left.  A good rationale detector removes the text the classifier
actually relied on, so the score drops a lot.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from lexrationale._parallel import ordered_map
from lexrationale.classifier import TrainedModel
from lexrationale.corpus import Corpus, Document
from lexrationale.rationale import BASE_THRESHOLD
from lexrationale.tokenize import Snippet, TokenSeq, tokenize, window_snippets

# (low, high); the top bucket is closed on the right
BUCKETS: tuple[tuple[float, float], ...] = ((0.5, 0.6), (0.6, 0.7), (0.7, 0.8), (0.8, 0.9), (0.9, 1.0))


def bucket_index(score: float) -> int | None:
    """Index into :data:`BUCKETS` for a max snippet score, or None below 0.5."""
    for i in range(len(BUCKETS) - 1, -1, -1):
        if score >= BUCKETS[i][0]:
            return i
    return None


def in_bucket(score: float, index: int) -> bool:
    lo, hi = BUCKETS[index]
    if index == len(BUCKETS) - 1:
        return lo <= score <= hi
    return lo <= score < hi


def bucket_label(index: int) -> str:
    lo, hi = BUCKETS[index]
    close = "]" if index == len(BUCKETS) - 1 else ")"
    return f"[{lo:g}, {hi:g}{close}"


@dataclass(frozen=True)
class BucketRow:
    label: str
    threshold_low: float
    threshold_high: float
    n_docs: int
    avg_doc_score: float
    avg_doc_score_snippet_removed: float
    avg_doc_score_reduction: float


@dataclass(frozen=True)
class DocEvaluation:
    doc_id: str
    doc_score: float
    max_snippet_score: float
    bucket: int | None
    reduced_score: float
    n_tokens: int
    n_removed: int

    @property
    def reduction(self) -> float:
        return self.doc_score - self.reduced_score


@dataclass(frozen=True)
class ScoreReductionReport:
    method: str
    snippet_size: int
    rows: tuple[BucketRow, ...]
    total: BucketRow
    n_eligible: int
    n_uncovered: int
    avg_tokens_per_doc: float
    avg_tokens_removed: float
    documents: tuple[DocEvaluation, ...] = field(default=(), repr=False)

    def row(self, label: str) -> BucketRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


@dataclass(frozen=True)
class PRCurve:
    points: tuple[PRPoint, ...]
    n_positive: int
    n_total: int

    @property
    def recalls(self) -> np.ndarray:
        return np.array([p.recall for p in self.points])

    @property
    def precisions(self) -> np.ndarray:
        return np.array([p.precision for p in self.points])


def eligible_test_docs(doc_model: TrainedModel, test: Corpus | Iterable[Document], threads: int = 1) -> list[Document]:
    """Responsive-labeled documents the document-level model scores >= 0.5."""
    return [d for d, _ in _eligible_with_scores(doc_model, test, threads)]


def _eligible_with_scores(doc_model, test, threads):
    docs = [d for d in test if d.responsive]
    seqs = [tokenize(d.text, d.id) for d in docs]
    keep = [(d, s) for d, s in zip(docs, seqs) if s.tokens]
    scores = ordered_map(lambda ds: float(doc_model.score_units([ds[1].tokens])[0]), keep, threads)
    return [(d, s) for (d, seq), s in zip(keep, scores) if s >= BASE_THRESHOLD]


def removal_mask(length: int, snippets: Iterable[Snippet]) -> np.ndarray:
    mask = np.zeros(length, dtype=bool)
    for s in snippets:
        if s.start < 0 or s.length < 0 or s.start + s.length > length:
            raise IndexError(f"snippet [{s.start}, {s.start + s.length}) outside a {length}-token sequence")
        mask[s.start : s.start + s.length] = True
    return mask


def remove_rationale_tokens(seq: TokenSeq, snippets: Iterable[Snippet]) -> TokenSeq:
    """Delete every token covered by any of ``snippets``; the rest keep their order."""
    snippets = list(snippets)
    for s in snippets:
        if seq.doc_id and s.doc_id and s.doc_id != seq.doc_id:
            raise ValueError(f"snippet from document {s.doc_id!r} applied to {seq.doc_id!r}")
    mask = removal_mask(len(seq.tokens), snippets)
    return TokenSeq(tuple(t for t, m in zip(seq.tokens, mask) if not m), seq.doc_id)


def evaluate_document(
    seq: TokenSeq, doc_score: float, doc_model: TrainedModel, rationale_model: TrainedModel, snippet_size: int
) -> DocEvaluation:
    snippets = window_snippets(seq, snippet_size)
    scores = rationale_model.score_units([s.tokens for s in snippets])
    top = float(scores.max())
    bucket = bucket_index(top)
    if bucket is None:
        return DocEvaluation(seq.doc_id, doc_score, top, None, doc_score, len(seq), 0)
    removed = [s for s, p in zip(snippets, scores) if in_bucket(float(p), bucket)]
    reduced = remove_rationale_tokens(seq, removed)
    reduced_score = float(doc_model.score_units([reduced.tokens])[0])
    return DocEvaluation(seq.doc_id, doc_score, top, bucket, reduced_score, len(seq), len(seq) - len(reduced))


def _row(label: str, lo: float, hi: float, docs: Sequence[DocEvaluation]) -> BucketRow:
    if not docs:
        nan = math.nan
        return BucketRow(label, lo, hi, 0, nan, nan, nan)
    orig = float(np.mean([d.doc_score for d in docs]))
    reduced = float(np.mean([d.reduced_score for d in docs]))
    return BucketRow(label, lo, hi, len(docs), orig, reduced, orig - reduced)


def score_reduction_report(
    doc_model: TrainedModel,
    rationale_model: TrainedModel,
    test: Corpus,
    snippet_size: int = 50,
    method: str | None = None,
    threads: int = 1,
) -> ScoreReductionReport:
    """Bucketed score-reduction statistics plus token-removal averages.

    Rows come highest bucket first.  Documents whose largest snippet score is
    below 0.5 are counted in ``n_uncovered`` and left out of every row.
    """
    eligible = _eligible_with_scores(doc_model, test, threads)
    seqs = {d.id: tokenize(d.text, d.id) for d, _ in eligible}
    evals = ordered_map(
        lambda ds: evaluate_document(seqs[ds[0].id], ds[1], doc_model, rationale_model, snippet_size),
        eligible,
        threads,
    )
    included = [e for e in evals if e.bucket is not None]
    rows = []
    for i in range(len(BUCKETS) - 1, -1, -1):
        lo, hi = BUCKETS[i]
        rows.append(_row(bucket_label(i), lo, hi, [e for e in included if e.bucket == i]))
    total = _row("Tot/Avg", BUCKETS[0][0], BUCKETS[-1][1], included)
    avg_tokens = float(np.mean([e.n_tokens for e in included])) if included else math.nan
    avg_removed = float(np.mean([e.n_removed for e in included])) if included else math.nan
    return ScoreReductionReport(
        method=method or rationale_model.kind,
        snippet_size=snippet_size,
        rows=tuple(rows),
        total=total,
        n_eligible=len(evals),
        n_uncovered=len(evals) - len(included),
        avg_tokens_per_doc=avg_tokens,
        avg_tokens_removed=avg_removed,
        documents=tuple(evals),
    )


def pr_curve_from_scores(scores, labels, steps: int | None = 100) -> PRCurve:
    """Precision/recall of ``score >= t`` over descending thresholds.

    Thresholds are the distinct scores, thinned to ``steps`` evenly spaced
    order statistics when there are more; the lowest score is always kept so
    the curve ends at recall 1.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("precision/recall needs at least one responsive document")
    thresholds = np.unique(scores)[::-1]
    if steps is not None and len(thresholds) > steps:
        picks = np.unique(np.round(np.linspace(0, len(thresholds) - 1, steps)).astype(int))
        thresholds = thresholds[picks]
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    cum_tp = np.cumsum(labels[order])
    points = []
    for t in thresholds:
        n_pred = int(np.searchsorted(-sorted_scores, -t, side="right"))
        tp = int(cum_tp[n_pred - 1]) if n_pred else 0
        precision = tp / n_pred if n_pred else 1.0
        points.append(PRPoint(float(t), precision, tp / n_pos))
    return PRCurve(tuple(points), n_pos, len(scores))


def pr_curve(doc_model: TrainedModel, test: Corpus, steps: int | None = 100, threads: int = 1) -> PRCurve:
    """Document-level precision/recall curve of ``doc_model`` on ``test``."""
    docs = list(test)
    seqs = [tokenize(d.text, d.id).tokens for d in docs]
    scores = ordered_map(lambda t: float(doc_model.score_units([t])[0]), seqs, threads)
    return pr_curve_from_scores(scores, [d.responsive for d in docs], steps)


def _fmt(x: float, digits: int = 2) -> str:
    return "-" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def format_report(report: ScoreReductionReport) -> str:
    """Aligned plain-text table in the usual score-reduction layout."""
    header = ("Snippet Score TH", "#Doc", "Avg Doc Score", "Avg Doc Score With Snippet Rmd", "Avg Doc Score Reduction")
    body = [
        (r.label, f"{r.n_docs:,}", _fmt(r.avg_doc_score), _fmt(r.avg_doc_score_snippet_removed), _fmt(r.avg_doc_score_reduction))
        for r in (*report.rows, report.total)
    ]
    widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(header)]
    lines = [f"{report.method} (snippet size {report.snippet_size})"]
    lines.append("  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths))))
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
    lines.append("")
    lines.append(f"eligible responsive test documents: {report.n_eligible}")
    lines.append(f"without a snippet scoring >= 0.5:   {report.n_uncovered}")
    lines.append(f"average tokens per document:        {_fmt(report.avg_tokens_per_doc, 1)}")
    lines.append(f"average tokens removed:             {_fmt(report.avg_tokens_removed, 1)}")
    return "\n".join(lines) + "\n"


REPORT_COLUMNS = (
    "method", "snippet_score_th", "n_docs", "avg_doc_score", "avg_doc_score_snippet_removed", "avg_doc_score_reduction",
)
TOKEN_COLUMNS = ("method", "snippet_size", "n_eligible", "n_uncovered", "n_docs", "avg_tokens_per_doc", "avg_tokens_removed")
PR_COLUMNS = ("threshold", "precision", "recall")


def _csv_num(x: float) -> str:
    return "" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def report_to_csv(report: ScoreReductionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in (*report.rows, report.total):
        w.writerow([report.method, r.label, r.n_docs, _csv_num(r.avg_doc_score),
                    _csv_num(r.avg_doc_score_snippet_removed), _csv_num(r.avg_doc_score_reduction)])
    return buf.getvalue()


def token_stats_to_csv(report: ScoreReductionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TOKEN_COLUMNS)
    w.writerow([report.method, report.snippet_size, report.n_eligible, report.n_uncovered, report.total.n_docs,
                _csv_num(report.avg_tokens_per_doc), _csv_num(report.avg_tokens_removed)])
    return buf.getvalue()


def pr_curve_to_csv(curve: PRCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PR_COLUMNS)
    for p in curve.points:
        w.writerow([repr(p.threshold), repr(p.precision), repr(p.recall)])
    return buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def _csv_float(text: str) -> float:
    return math.nan if text == "" else float(text)


def read_report_files(score_csv: str, token_csv: str) -> ScoreReductionReport:
    """Rebuild a report (without per-document detail) from its two CSV files."""
    rows = read_report_csv(score_csv)
    stats = read_report_csv(token_csv)
    if not rows or len(stats) != 1:
        raise ValueError("report CSVs are empty or malformed")
    labels = [bucket_label(i) for i in range(len(BUCKETS) - 1, -1, -1)]
    if [r["snippet_score_th"] for r in rows] != [*labels, "Tot/Avg"]:
        raise ValueError("score-reduction CSV does not have the expected bucket rows")
    bounds = [BUCKETS[i] for i in range(len(BUCKETS) - 1, -1, -1)] + [(BUCKETS[0][0], BUCKETS[-1][1])]
    parsed = [
        BucketRow(r["snippet_score_th"], lo, hi, int(r["n_docs"]), _csv_float(r["avg_doc_score"]),
                  _csv_float(r["avg_doc_score_snippet_removed"]), _csv_float(r["avg_doc_score_reduction"]))
        for r, (lo, hi) in zip(rows, bounds)
    ]
    s = stats[0]
    return ScoreReductionReport(
        method=s["method"],
        snippet_size=int(s["snippet_size"]),
        rows=tuple(parsed[:-1]),
        total=parsed[-1],
        n_eligible=int(s["n_eligible"]),
        n_uncovered=int(s["n_uncovered"]),
        avg_tokens_per_doc=_csv_float(s["avg_tokens_per_doc"]),
        avg_tokens_removed=_csv_float(s["avg_tokens_removed"]),
    )


def read_pr_curve_csv(text: str) -> PRCurve:
    """Inverse of :func:`pr_curve_to_csv`; class counts are not stored and come back as 0."""
    points = tuple(
        PRPoint(float(r["threshold"]), float(r["precision"]), float(r["recall"])) for r in read_report_csv(text)
    )
    return PRCurve(points, 0, 0)


def format_token_table(reports: Sequence[ScoreReductionReport]) -> str:
    """Average tokens per document and tokens removed, one line per method."""
    header = ("Method", "Avg Tokens in a Document", "Avg Tokens Removed")
    body = [(r.method, _fmt(r.avg_tokens_per_doc, 1), _fmt(r.avg_tokens_removed, 1)) for r in reports]
    widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"


COMPARISON_COLUMNS = (
    "method", "snippet_size", "n_docs_top_bucket", "n_docs_total", "tot_avg_reduction",
    "avg_tokens_per_doc", "avg_tokens_removed",
)


def comparison_to_csv(reports: Sequence[ScoreReductionReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_COLUMNS)
    for r in reports:
        w.writerow([r.method, r.snippet_size, r.rows[0].n_docs, r.total.n_docs,
                    _csv_num(r.total.avg_doc_score_reduction), _csv_num(r.avg_tokens_per_doc),
                    _csv_num(r.avg_tokens_removed)])
    return buf.getvalue()
