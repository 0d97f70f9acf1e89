"""Linear epsilon-insensitive support vector regression.

Training minimizes 0.5*||w||^2 + C * sum_i max(0, |w.x_i + b - y_i| - eps)
by exact dual coordinate descent over examples in seeded random order. The
bias is realized as an always-on augmented feature, so it is regularized
together with the weights. The dual objective is minimized monotonically;
a full pass whose largest dual-variable update falls below the tolerance
terminates training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from emotensity.data_model import Corpus
from emotensity.errors import DataFormatError, ValidationError
from emotensity.features import FeatureVector, FittedVectorizer, transform
from emotensity.metrics import pearson, spearman

__all__ = ["SvrConfig", "SvrModel", "TrainDiagnostics", "train", "predict", "predict_many", "evaluate"]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SvrConfig:
    C: float = 100.0
    epsilon: float = 0.1
    tolerance: float = 1e-4
    max_iterations: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValidationError("C must be positive")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be non-negative")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")


@dataclass(frozen=True)
class TrainDiagnostics:
    passes: int
    converged: bool
    objective_history: tuple[float, ...]
    max_update_history: tuple[float, ...]


class SvrModel:
    """Trained linear regressor: sparse weights over the feature space plus bias."""

    def __init__(
        self,
        weight_indices: np.ndarray,
        weight_values: np.ndarray,
        bias: float,
        config: SvrConfig,
        training_dim: int,
        diagnostics: Optional[TrainDiagnostics] = None,
    ):
        if weight_indices.shape != weight_values.shape:
            raise ValidationError("weight indices and values must have matching shapes")
        if weight_indices.size and int(weight_indices.max()) >= training_dim:
            raise ValidationError("weight index out of range")
        if not (np.all(np.isfinite(weight_values)) and np.isfinite(bias)):
            raise ValidationError("model parameters must be finite")
        self.weight_indices = weight_indices.astype(np.int64)
        self.weight_values = weight_values.astype(np.float64)
        self.bias = float(bias)
        self.config = config
        self.training_dim = int(training_dim)
        self.diagnostics = diagnostics
        self._dense: Optional[np.ndarray] = None

    def dense_weights(self) -> np.ndarray:
        if self._dense is None:
            dense = np.zeros(self.training_dim, dtype=np.float64)
            dense[self.weight_indices] = self.weight_values
            self._dense = dense
        return self._dense

    # --- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "training_dim": self.training_dim,
            "bias": self.bias,
            "weights": {
                "indices": [int(i) for i in self.weight_indices],
                "values": [float(v) for v in self.weight_values],
            },
            "config": {
                "C": self.config.C,
                "epsilon": self.config.epsilon,
                "tolerance": self.config.tolerance,
                "max_iterations": self.config.max_iterations,
                "seed": self.config.seed,
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SvrModel":
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataFormatError(f"unsupported model format version {doc.get('format_version')!r}")
        cfg = doc["config"]
        return cls(
            weight_indices=np.asarray(doc["weights"]["indices"], dtype=np.int64),
            weight_values=np.asarray(doc["weights"]["values"], dtype=np.float64),
            bias=doc["bias"],
            config=SvrConfig(
                C=cfg["C"],
                epsilon=cfg["epsilon"],
                tolerance=cfg["tolerance"],
                max_iterations=cfg["max_iterations"],
                seed=cfg["seed"],
            ),
            training_dim=doc["training_dim"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "SvrModel":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train(X: Sequence[FeatureVector], y: Sequence[float], config: SvrConfig = SvrConfig()) -> SvrModel:
    """Fit the regressor by dual coordinate descent; deterministic given
    (data, config, seed)."""
    if len(X) != len(y):
        raise ValidationError(f"got {len(X)} feature vectors but {len(y)} targets")
    if len(X) < 1:
        raise ValidationError("need at least one training example")
    dim = X[0].total_dim
    for fv in X:
        if fv.total_dim != dim:
            raise ValidationError(f"feature vectors disagree on total_dim ({fv.total_dim} != {dim})")
    targets = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(targets)):
        raise ValidationError("targets contain non-finite values")
    if np.any(targets < 0.0) or np.any(targets > 1.0):
        raise ValidationError("targets must lie in [0, 1]")

    n = len(X)
    # the bias is an extra always-on feature at column `dim`
    rows = [
        (np.append(fv.indices, dim).astype(np.int64), np.append(fv.values, 1.0).astype(np.float64))
        for fv in X
    ]
    qii = np.array([float(np.dot(vals, vals)) for _, vals in rows])
    w = np.zeros(dim + 1, dtype=np.float64)
    beta = np.zeros(n, dtype=np.float64)
    C = config.C
    eps = config.epsilon
    rng = np.random.Generator(np.random.PCG64(config.seed))

    objective_history: list[float] = []
    update_history: list[float] = []
    converged = False
    passes = 0
    for _pass in range(config.max_iterations):
        passes += 1
        order = rng.permutation(n)
        max_update = 0.0
        for i in order:
            idx, vals = rows[i]
            g = float(np.dot(w[idx], vals)) - targets[i]
            b_i = beta[i]
            q = qii[i]
            # exact minimizer of 0.5*q*(z-b)^2 + g*(z-b) + eps*|z| over the box
            z_pos = b_i - (g + eps) / q
            z_neg = b_i - (g - eps) / q
            if z_pos > 0.0:
                z = z_pos
            elif z_neg < 0.0:
                z = z_neg
            else:
                z = 0.0
            z = min(C, max(-C, z))
            d = z - b_i
            if d != 0.0:
                w[idx] += d * vals
                beta[i] = z
            ad = abs(d)
            if ad > max_update:
                max_update = ad
        dual = 0.5 * float(np.dot(w, w)) - float(np.dot(beta, targets)) + eps * float(np.abs(beta).sum())
        objective_history.append(dual)
        update_history.append(max_update)
        if max_update < config.tolerance:
            converged = True
            break

    nz = np.nonzero(w[:dim])[0]
    return SvrModel(
        weight_indices=nz,
        weight_values=w[nz],
        bias=float(w[dim]),
        config=config,
        training_dim=dim,
        diagnostics=TrainDiagnostics(
            passes=passes,
            converged=converged,
            objective_history=tuple(objective_history),
            max_update_history=tuple(update_history),
        ),
    )


def predict(model: SvrModel, x: FeatureVector) -> float:
    """w.x + b, unclipped."""
    if x.total_dim != model.training_dim:
        raise ValidationError(f"feature dim {x.total_dim} != model dim {model.training_dim}")
    dense = model.dense_weights()
    return float(np.dot(dense[x.indices], x.values)) + model.bias


def predict_many(model: SvrModel, xs: Sequence[FeatureVector], clip: bool = False) -> np.ndarray:
    preds = np.array([predict(model, x) for x in xs])
    if clip:
        preds = np.clip(preds, 0.0, 1.0)
    return preds


def evaluate(model: SvrModel, corpus: Corpus, vectorizer: FittedVectorizer) -> tuple[float, float]:
    """Transform, predict, and correlate against gold; returns (Pearson, Spearman)."""
    gold = corpus.gold_vector()
    preds = predict_many(model, [transform(vectorizer, item) for item in corpus])
    return pearson(preds, gold), spearman(preds, gold)
