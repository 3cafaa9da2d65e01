"""Annotation-free rationale detection for responsive-document review.

Three rationale scorers share one pipeline: a document-level logistic
regression baseline, the snippet model (documents scored by the baseline
seed a snippet-level training set), and the iterative snippet model (the
same bootstrap repeated with shrinking window sizes).  The ``evaluation``
module measures rationale quality without snippet labels by deleting the
detected rationales and rescoring the document.
"""

from lexrationale.classifier import (
    TrainConfig,
    TrainedModel,
    fit_pipeline,
    load_model,
    predict_proba,
    save_model,
    train_logistic,
)
from lexrationale.corpus import Corpus, Document, Label, Split, load_corpus, save_corpus, split_corpus
from lexrationale.evaluation import pr_curve, remove_rationale_tokens, score_reduction_report
from lexrationale.features import FeatureSpace, FeatureVector, extract_ngrams, information_gain, select_top_k, vectorize
from lexrationale.rationale import (
    IterConfig,
    ScoredSnippet,
    SelectionConfig,
    rank_rationales,
    select_responsive_snippets,
    train_document_model,
    train_iterative_method,
    train_snippet_method,
)
from lexrationale.tokenize import Snippet, TokenSeq, tokenize, window_snippets

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Document",
    "FeatureSpace",
    "FeatureVector",
    "IterConfig",
    "Label",
    "ScoredSnippet",
    "SelectionConfig",
    "Snippet",
    "Split",
    "TokenSeq",
    "TrainConfig",
    "TrainedModel",
    "extract_ngrams",
    "fit_pipeline",
    "information_gain",
    "load_corpus",
    "load_model",
    "pr_curve",
    "predict_proba",
    "rank_rationales",
    "remove_rationale_tokens",
    "save_corpus",
    "save_model",
    "score_reduction_report",
    "select_responsive_snippets",
    "select_top_k",
    "split_corpus",
    "tokenize",
    "train_document_model",
    "train_iterative_method",
    "train_logistic",
    "train_snippet_method",
    "vectorize",
    "window_snippets",
]
