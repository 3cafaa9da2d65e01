"""L2-regularized binary logistic regression and the train/score pipeline."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from lexrationale import features as feat
from lexrationale.features import FeatureSpace, FeatureVector

log = logging.getLogger(__name__)

MODEL_FORMAT = "lexrationale-model"
MODEL_VERSION = 1

DOCUMENT_LEVEL = "DocumentLevel"
SNIPPET_MODEL = "SnippetModel"
ITERATIVE_SNIPPET = "IterativeSnippet"
PROVENANCE_KINDS = (DOCUMENT_LEVEL, SNIPPET_MODEL, ITERATIVE_SNIPPET)


class ModelFormatError(ValueError):
    """Raised when a model file cannot be parsed or has the wrong version."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_epochs: int = 500
    l2_lambda: float = 1e-4
    grad_tolerance: float = 1e-6
    k: int = feat.DEFAULT_K
    ngram_max: int = feat.NGRAM_MAX
    min_feature_units: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.grad_tolerance < 0:
            raise ValueError("grad_tolerance must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 1 <= self.ngram_max <= 3:
            raise ValueError("ngram_max must lie in 1..3")


@dataclass(frozen=True)
class Provenance:
    kind: str = DOCUMENT_LEVEL
    snippet_size: int | None = None
    schedule: tuple[int, ...] = ()
    n_positive: int = 0
    n_negative: int = 0
    epochs: int = 0
    converged: bool = False

    def __post_init__(self):
        if self.kind not in PROVENANCE_KINDS:
            raise ValueError(f"unknown provenance kind {self.kind!r}")
        object.__setattr__(self, "schedule", tuple(self.schedule))


@dataclass(frozen=True)
class TrainedModel:
    space: FeatureSpace
    weights: np.ndarray
    bias: float
    config: TrainConfig = field(default_factory=TrainConfig)
    provenance: Provenance = field(default_factory=Provenance)
    loss_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.space.k,):
            raise ValueError(f"weight vector has shape {w.shape}, expected ({self.space.k},)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def kind(self) -> str:
        return self.provenance.kind

    def decision(self, X: sparse.spmatrix) -> np.ndarray:
        return X @ self.weights + self.bias

    def score_matrix(self, X: sparse.spmatrix) -> np.ndarray:
        return sigmoid(self.decision(X))

    def score_units(self, units: Sequence) -> np.ndarray:
        """Probability of the responsive class for each token sequence."""
        if not len(units):
            return np.zeros(0)
        return self.score_matrix(feat.vectorize_many(units, self.space))

    def with_provenance(self, **changes) -> "TrainedModel":
        return dataclasses.replace(self, provenance=dataclasses.replace(self.provenance, **changes))


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_P_MIN = np.nextafter(0.0, 1.0)
_P_MAX = np.nextafter(1.0, 0.0)


def sigmoid(z):
    """Logistic function, kept strictly inside (0, 1) even when it saturates."""
    return np.clip(_sigmoid(z), _P_MIN, _P_MAX)


def regularized_nll(X, y, weights, bias, l2_lambda, penalty_scale=None):
    """Mean negative log-likelihood plus a ridge penalty on the weights.

    The penalty is ``l2_lambda / 2 * sum((penalty_scale * w) ** 2)``; with
    ``penalty_scale=None`` it is the plain ``l2_lambda / 2 * ||w||^2``.  The
    bias is not penalized.  Returns ``(loss, grad_w, grad_b)``.
    """
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    z = X @ weights + bias
    # log(1 + e^z) - y z, stable for large |z|
    nll = np.logaddexp(0.0, z) - y * z
    n = len(y)
    p2 = 1.0 if penalty_scale is None else np.asarray(penalty_scale, dtype=float) ** 2
    pw = p2 * weights
    loss = nll.sum() / n + 0.5 * l2_lambda * float(weights @ pw)
    resid = _sigmoid(z) - y
    grad_w = np.asarray(X.T @ resid).ravel() / n + l2_lambda * pw
    grad_b = resid.sum() / n
    return float(loss), grad_w, float(grad_b)


def column_moments(X) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and standard deviation (1 where a column is constant)."""
    mean = np.asarray(X.mean(axis=0)).ravel()
    sq = np.asarray(X.multiply(X).mean(axis=0)).ravel() if sparse.issparse(X) else (np.asarray(X) ** 2).mean(axis=0)
    std = np.sqrt(np.maximum(sq - mean**2, 0.0))
    std = np.where(std > 1e-12 * np.maximum(np.abs(mean), 1e-300), std, 1.0)
    std[std == 0] = 1.0
    return mean, std


class _Standardized:
    """Loss in centered, unit-variance coordinates ``v = std * w``, ``c = b + mean . w``.

    The linear predictor is unchanged, ``X w + b = Z v + c`` with
    ``Z = (X - mean) / std``, but ``Z`` is never formed so ``X`` stays sparse.
    """

    def __init__(self, X, y, l2_lambda):
        self.X = X
        self.y = y
        self.n = len(y)
        self.lam = l2_lambda
        self.mean, self.std = column_moments(X)

    def to_raw(self, v, c):
        w = v / self.std
        return w, c - float(self.mean @ w)

    def evaluate(self, v, c):
        w, b = self.to_raw(v, c)
        z = self.X @ w + b
        loss = (np.logaddexp(0.0, z) - self.y * z).sum() / self.n + 0.5 * self.lam * float(v @ v)
        resid = _sigmoid(z) - self.y
        rsum = resid.sum()
        gv = (np.asarray(self.X.T @ resid).ravel() - self.mean * rsum) / (self.std * self.n) + self.lam * v
        gc = rsum / self.n
        return float(loss), gv, float(gc)


def _fit(X, y, cfg: TrainConfig):
    """Full-batch gradient descent from zero in standardized coordinates.

    Steps start at ``cfg.learning_rate``; a step is accepted only under the
    Armijo condition (halving until it holds) and the next step is 25% longer.
    Once the required decrease is below float resolution, a step is accepted
    unless it raises the loss by more than rounding noise, so the loss is
    non-increasing up to ~1e-15.  Stops when the gradient's infinity
    norm (standardized coordinates) drops below ``cfg.grad_tolerance`` or
    after ``cfg.max_epochs`` accepted steps.
    """
    problem = _Standardized(X, y, cfg.l2_lambda)
    v = np.zeros(X.shape[1])
    c = 0.0
    loss, gv, gc = problem.evaluate(v, c)
    history = [loss]
    eta = cfg.learning_rate
    converged = False
    epochs = 0
    while epochs < cfg.max_epochs:
        if max(np.max(np.abs(gv), initial=0.0), abs(gc)) < cfg.grad_tolerance:
            converged = True
            break
        sq_norm = float(gv @ gv) + gc * gc
        # loss changes below this are rounding noise in float64
        noise = 4.0 * np.finfo(float).eps * max(abs(loss), 1.0)
        while True:
            v_new = v - eta * gv
            c_new = c - eta * gc
            new_loss, new_gv, new_gc = problem.evaluate(v_new, c_new)
            wanted = 1e-4 * eta * sq_norm
            if new_loss <= loss - wanted or (wanted <= noise and new_loss <= loss + noise):
                break
            eta *= 0.5
            if eta < 1e-16:
                break
        if eta < 1e-16:
            log.debug("line search stalled after %d epochs (gradient norm %.3g)", epochs, np.sqrt(sq_norm))
            break
        v, c, loss, gv, gc = v_new, c_new, new_loss, new_gv, new_gc
        history.append(loss)
        epochs += 1
        eta *= 1.25
    w, b = problem.to_raw(v, c)
    return w, b, problem.std, history, epochs, converged


def _stack(vectors, k: int | None):
    if sparse.issparse(vectors):
        return sparse.csr_matrix(vectors, dtype=float)
    vectors = list(vectors)
    if k is None:
        k = 1 + max((c for v in vectors for c in v.entries), default=-1)
    return feat.to_matrix(vectors, k)


def train_logistic(
    positives,
    negatives,
    config: TrainConfig = TrainConfig(),
    space: FeatureSpace | None = None,
) -> TrainedModel:
    """Fit weights and bias on responsive (``positives``) vs ``negatives``.

    Both collections are sequences of :class:`FeatureVector` or CSR matrices
    built against ``space``.  Training starts from zero and is deterministic.
    """
    k = space.k if space is not None else None
    Xp = _stack(positives, k)
    Xn = _stack(negatives, k)
    if Xp.shape[0] == 0 or Xn.shape[0] == 0:
        raise ValueError("training needs at least one vector of each class")
    if space is None:
        width = max(Xp.shape[1], Xn.shape[1])
        Xp.resize((Xp.shape[0], width))
        Xn.resize((Xn.shape[0], width))
        space = FeatureSpace(tuple(f"f{i}" for i in range(width)))
    elif Xp.shape[1] != space.k or Xn.shape[1] != space.k:
        raise ValueError("vectors were not built against the given feature space")
    X = sparse.vstack([Xp, Xn], format="csr")
    if not np.all(np.isfinite(X.data)):
        raise ValueError("feature values must be finite")
    y = np.concatenate([np.ones(Xp.shape[0]), np.zeros(Xn.shape[0])])
    w, b, _, history, epochs, converged = _fit(X, y, config)
    log.debug("trained %d features on %d+%d units in %d epochs (loss %.6f)",
              space.k, Xp.shape[0], Xn.shape[0], epochs, history[-1])
    prov = Provenance(n_positive=Xp.shape[0], n_negative=Xn.shape[0], epochs=epochs, converged=converged)
    return TrainedModel(space, w, b, config, prov, tuple(history))


def predict_proba(model: TrainedModel, vector: FeatureVector) -> float:
    z = model.bias
    for col, val in vector.entries.items():
        if not 0 <= col < model.space.k:
            raise IndexError(f"feature column {col} outside model space of size {model.space.k}")
        z += model.weights[col] * val
    return float(sigmoid(np.array([z]))[0])


def is_responsive(score: float) -> bool:
    return score >= 0.5


def fit_pipeline(resp_units: Sequence, nonresp_units: Sequence, config: TrainConfig = TrainConfig()) -> TrainedModel:
    """Select features on these units, vectorize them, and fit the classifier."""
    if not resp_units or not nonresp_units:
        raise ValueError("fit_pipeline needs units of both classes")
    space = feat.select_top_k(resp_units, nonresp_units, config.k, config.ngram_max, config.min_feature_units)
    Xp = feat.vectorize_many(resp_units, space)
    Xn = feat.vectorize_many(nonresp_units, space)
    return train_logistic(Xp, Xn, config, space)


def _model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "provenance": dataclasses.asdict(model.provenance),
        "config": dataclasses.asdict(model.config),
        "ngram_max": model.space.ngram_max,
        "features": list(model.space.features),
        "weights": [float(x) for x in model.weights],
        "bias": model.bias,
    }


def dumps_model(model: TrainedModel) -> str:
    return json.dumps(_model_to_dict(model), indent=1) + "\n"


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def loads_model(text: str) -> TrainedModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file: {exc.msg}") from None
    if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a lexrationale model file")
    if data.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {data.get('version')!r}; expected {MODEL_VERSION}")
    try:
        space = FeatureSpace(tuple(data["features"]), int(data["ngram_max"]))
        weights = np.array(data["weights"], dtype=float)
        config = TrainConfig(**data["config"])
        prov = Provenance(**data["provenance"])
        return TrainedModel(space, weights, float(data["bias"]), config, prov)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None


def load_model(path: str | Path) -> TrainedModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}") from None
    return loads_model(text)


def loss_is_monotone(history: Sequence[float], slack: float = 1e-9) -> bool:
    return all(b <= a + slack for a, b in zip(history, history[1:]))


__all__ = [
    "DOCUMENT_LEVEL",
    "ITERATIVE_SNIPPET",
    "SNIPPET_MODEL",
    "ModelFormatError",
    "Provenance",
    "TrainConfig",
    "TrainedModel",
    "fit_pipeline",
    "is_responsive",
    "load_model",
    "loss_is_monotone",
    "predict_proba",
    "regularized_nll",
    "save_model",
    "sigmoid",
    "train_logistic",
]
