"""Report figures: precision/recall curves and score-reduction bucket bars.

Figures are drawn on the Agg canvas directly (no pyplot state), so rendering
is safe from worker threads and the PNG bytes depend only on the data.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from lexrationale.evaluation import PRCurve, ScoreReductionReport

# PNG text chunks; dropping the Software tag keeps bytes stable across matplotlib versions
_PNG_METADATA = {"Software": None}
_DPI = 100


def _new_figure(width: float = 6.0, height: float = 4.0) -> Figure:
    fig = Figure(figsize=(width, height), dpi=_DPI)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", dpi=_DPI, metadata=_PNG_METADATA)
    return path


def plot_pr_curves(curves: Mapping[str, PRCurve], path: str | Path, title: str = "Document-level precision/recall") -> Path:
    """One precision-vs-recall line per named curve."""
    fig = _new_figure()
    ax = fig.add_subplot()
    for name, curve in curves.items():
        ax.plot(curve.recalls, curve.precisions, marker=".", markersize=3, linewidth=1.2, label=name)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0.0, 1.02)
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, linewidth=0.4, alpha=0.6)
    ax.set_title(title)
    if curves:
        ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_bucket_reductions(reports: Sequence[ScoreReductionReport], path: str | Path) -> Path:
    """Grouped bars of document counts and mean score reduction per bucket.

    Buckets run from [0.5, 0.6) on the left to [0.9, 1] on the right; empty
    buckets draw as zero-height bars.
    """
    fig = _new_figure(8.0, 4.0)
    ax_n, ax_r = fig.subplots(1, 2)
    labels = [r.label for r in reports[0].rows][::-1] if reports else []
    x = np.arange(len(labels))
    width = 0.8 / max(len(reports), 1)
    for j, rep in enumerate(reports):
        rows = rep.rows[::-1]
        counts = [r.n_docs for r in rows]
        reductions = [0.0 if r.n_docs == 0 else r.avg_doc_score_reduction for r in rows]
        offset = (j - (len(reports) - 1) / 2) * width
        ax_n.bar(x + offset, counts, width, label=rep.method)
        ax_r.bar(x + offset, reductions, width, label=rep.method)
    for ax, ylabel in ((ax_n, "#Doc"), (ax_r, "Avg doc score reduction")):
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, fontsize=8)
        ax.set_xlabel("Largest snippet score")
        ax.set_ylabel(ylabel)
        ax.grid(True, axis="y", linewidth=0.4, alpha=0.6)
    if reports:
        ax_n.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
