"""Projection-based cross-lingual transfer.

Two routes into a shared embedding space:

- supervised orthogonal alignment (Procrustes over a bilingual dictionary),
  after which a regressor trained on source-language embedding features can
  score target-language text directly;
- a jointly trained bilingual regressor: two square projection matrices and
  a linear head, minimizing source-side MSE plus a weighted dictionary
  projection penalty, optimized with Adam and snapshotted at the best
  dev-set Pearson.

All matrices act on row vectors from the right: a vector v projects to
``v @ M``. Serialized matrices are row-major.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from emotensity.data_model import BilingualDictionary, Corpus, EmbeddingTable, Item
from emotensity.errors import DataFormatError, MetricError, ValidationError
from emotensity.features import tokenize
from emotensity.metrics import pearson, spearman

__all__ = [
    "AlignmentMap",
    "BlseModel",
    "EpochStats",
    "preprocess_embeddings",
    "procrustes_align",
    "map_embeddings",
    "train_blse",
    "predict_blse",
    "evaluate_blse",
    "average_embedding",
]

ALIGNMENT_FORMAT_VERSION = 1
BLSE_FORMAT_VERSION = 1
ORTHOGONALITY_TOLERANCE = 1e-6


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return matrix / safe


def _preprocess_matrix(matrix: np.ndarray) -> np.ndarray:
    out = _unit_rows(matrix.astype(np.float64))
    out = out - out.mean(axis=0)
    return _unit_rows(out)


def preprocess_embeddings(table: EmbeddingTable) -> EmbeddingTable:
    """Length-normalize, mean-center, length-normalize again (whole table)."""
    words = list(table.words())
    matrix = np.stack([table[w] for w in words]) if words else np.zeros((0, table.dim))
    processed = _preprocess_matrix(matrix)
    return EmbeddingTable(
        dim=table.dim,
        entries={w: processed[i] for i, w in enumerate(words)},
        duplicate_count=table.duplicate_count,
    )


class AlignmentMap:
    """Orthogonal map from the source embedding space onto the target space."""

    def __init__(self, W: np.ndarray, used_pairs: int = 0, dropped_pairs: int = 0):
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError(f"alignment matrix must be square, got shape {W.shape}")
        gram_error = float(np.linalg.norm(W.T @ W - np.eye(W.shape[0])))
        if gram_error > ORTHOGONALITY_TOLERANCE:
            raise ValidationError(f"alignment matrix is not orthogonal (||W'W - I||_F = {gram_error:.3g})")
        W = W.copy()
        W.setflags(write=False)
        self.W = W
        self.dim = W.shape[0]
        self.used_pairs = int(used_pairs)
        self.dropped_pairs = int(dropped_pairs)

    def to_json_dict(self) -> dict:
        return {
            "format_version": ALIGNMENT_FORMAT_VERSION,
            "dim": self.dim,
            "used_pairs": self.used_pairs,
            "dropped_pairs": self.dropped_pairs,
            "w": [[float(v) for v in row] for row in self.W],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AlignmentMap":
        if doc.get("format_version") != ALIGNMENT_FORMAT_VERSION:
            raise DataFormatError(f"unsupported alignment format version {doc.get('format_version')!r}")
        return cls(
            W=np.asarray(doc["w"], dtype=np.float64),
            used_pairs=doc.get("used_pairs", 0),
            dropped_pairs=doc.get("dropped_pairs", 0),
        )

    @classmethod
    def load(cls, path: str | Path) -> "AlignmentMap":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def procrustes_align(
    src: EmbeddingTable, tgt: EmbeddingTable, dictionary: BilingualDictionary
) -> AlignmentMap:
    """Closed-form orthogonal alignment over dictionary pairs.

    Both tables are preprocessed (normalize, center, normalize); pairs with
    a word missing from either table are dropped and counted. The returned
    map minimizes ||XW - Z||_F over orthogonal W.
    """
    if src.dim != tgt.dim:
        raise ValidationError(f"embedding dims differ: source {src.dim}, target {tgt.dim}")
    src_pre = preprocess_embeddings(src)
    tgt_pre = preprocess_embeddings(tgt)
    src_rows: list[np.ndarray] = []
    tgt_rows: list[np.ndarray] = []
    dropped = 0
    for s_word, t_word in dictionary.pairs:
        s_vec = src_pre.get(s_word)
        t_vec = tgt_pre.get(t_word)
        if s_vec is None or t_vec is None:
            dropped += 1
            continue
        src_rows.append(s_vec)
        tgt_rows.append(t_vec)
    if len(src_rows) < src.dim:
        raise ValidationError(
            f"need at least {src.dim} resolvable dictionary pairs, got {len(src_rows)} "
            f"({dropped} dropped as out-of-vocabulary)"
        )
    X = np.stack(src_rows)
    Z = np.stack(tgt_rows)
    U, _, Vt = np.linalg.svd(X.T @ Z)
    return AlignmentMap(W=U @ Vt, used_pairs=len(src_rows), dropped_pairs=dropped)


def map_embeddings(alignment: AlignmentMap, table: EmbeddingTable) -> EmbeddingTable:
    """Apply the alignment to a whole table (with the same preprocessing)."""
    if table.dim != alignment.dim:
        raise ValidationError(f"table dim {table.dim} != alignment dim {alignment.dim}")
    pre = preprocess_embeddings(table)
    return EmbeddingTable(
        dim=table.dim,
        entries={w: pre[w] @ alignment.W for w in pre.words()},
        duplicate_count=table.duplicate_count,
    )


# --- joint bilingual regression -----------------------------------------------


def average_embedding(text: str, table: EmbeddingTable) -> np.ndarray:
    """Mean of in-vocabulary token vectors; zero vector when none match."""
    vectors = [table[tok] for tok in tokenize(text) if tok in table]
    if not vectors:
        return np.zeros(table.dim, dtype=np.float64)
    return np.mean(vectors, axis=0)


@dataclass(frozen=True)
class EpochStats:
    mse: float
    projection_loss: float
    dev_pearson: float  # NaN when dev predictions were constant that epoch


class BlseModel:
    """Best-dev snapshot of the jointly trained bilingual regressor.

    Epochs are numbered from 1, so the snapshot's stats sit at
    history[best_epoch - 1].
    """

    def __init__(
        self,
        m_src: np.ndarray,
        m_tgt: np.ndarray,
        head_weights: np.ndarray,
        head_bias: float,
        alpha: float,
        learning_rate: float,
        seed: int,
        best_epoch: int,
        history: Sequence[EpochStats],
        initial_mse: float,
        initial_projection_loss: float,
    ):
        m_src = np.asarray(m_src, dtype=np.float64)
        m_tgt = np.asarray(m_tgt, dtype=np.float64)
        head_weights = np.asarray(head_weights, dtype=np.float64)
        d = head_weights.shape[0]
        if m_src.shape != (d, d) or m_tgt.shape != (d, d):
            raise ValidationError("projection matrices must be square and match the head dimension")
        for arr in (m_src, m_tgt, head_weights):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("model parameters must be finite")
        if not math.isfinite(head_bias):
            raise ValidationError("model parameters must be finite")
        m_src.setflags(write=False)
        m_tgt.setflags(write=False)
        head_weights.setflags(write=False)
        self.m_src = m_src
        self.m_tgt = m_tgt
        self.head_weights = head_weights
        self.head_bias = float(head_bias)
        self.dim = d
        self.alpha = float(alpha)
        self.learning_rate = float(learning_rate)
        self.seed = int(seed)
        self.best_epoch = int(best_epoch)
        self.history = tuple(history)
        self.initial_mse = float(initial_mse)
        self.initial_projection_loss = float(initial_projection_loss)

    def to_json_dict(self) -> dict:
        def _num(value: float) -> Optional[float]:
            return None if math.isnan(value) else float(value)

        return {
            "format_version": BLSE_FORMAT_VERSION,
            "dim": self.dim,
            "m_src": [[float(v) for v in row] for row in self.m_src],
            "m_tgt": [[float(v) for v in row] for row in self.m_tgt],
            "head_weights": [float(v) for v in self.head_weights],
            "head_bias": self.head_bias,
            "alpha": self.alpha,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "initial_mse": self.initial_mse,
            "initial_projection_loss": self.initial_projection_loss,
            "history": [
                {"mse": h.mse, "projection_loss": h.projection_loss, "dev_pearson": _num(h.dev_pearson)}
                for h in self.history
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "BlseModel":
        if doc.get("format_version") != BLSE_FORMAT_VERSION:
            raise DataFormatError(f"unsupported model format version {doc.get('format_version')!r}")
        history = tuple(
            EpochStats(
                mse=h["mse"],
                projection_loss=h["projection_loss"],
                dev_pearson=float("nan") if h["dev_pearson"] is None else h["dev_pearson"],
            )
            for h in doc["history"]
        )
        return cls(
            m_src=np.asarray(doc["m_src"], dtype=np.float64),
            m_tgt=np.asarray(doc["m_tgt"], dtype=np.float64),
            head_weights=np.asarray(doc["head_weights"], dtype=np.float64),
            head_bias=doc["head_bias"],
            alpha=doc["alpha"],
            learning_rate=doc["learning_rate"],
            seed=doc["seed"],
            best_epoch=doc["best_epoch"],
            history=history,
            initial_mse=doc["initial_mse"],
            initial_projection_loss=doc["initial_projection_loss"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "BlseModel":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class _Adam:
    """Per-tensor Adam state; beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, shape: tuple[int, ...], learning_rate: float):
        self.lr = learning_rate
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = 0.9 * self.m + 0.1 * grad
        self.v = 0.999 * self.v + 0.001 * grad * grad
        m_hat = self.m / (1.0 - 0.9**self.t)
        v_hat = self.v / (1.0 - 0.999**self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + 1e-8)


def _resolve_dictionary(
    dictionary: BilingualDictionary, src_emb: EmbeddingTable, tgt_emb: EmbeddingTable
) -> tuple[np.ndarray, np.ndarray]:
    src_rows = []
    tgt_rows = []
    for s_word, t_word in dictionary.pairs:
        s_vec = src_emb.get(s_word)
        t_vec = tgt_emb.get(t_word)
        if s_vec is None or t_vec is None:
            continue
        src_rows.append(s_vec)
        tgt_rows.append(t_vec)
    if not src_rows:
        raise ValidationError("no dictionary pair is resolvable in both embedding tables")
    return np.stack(src_rows), np.stack(tgt_rows)


def train_blse(
    src_corpus: Corpus,
    src_emb: EmbeddingTable,
    tgt_emb: EmbeddingTable,
    dictionary: BilingualDictionary,
    dev: Corpus,
    epochs: int = 100,
    learning_rate: float = 0.001,
    alpha: float = 1.0,
    seed: int = 0,
) -> BlseModel:
    """Jointly fit projections and head; return the best-dev-Pearson snapshot.

    Loss: mean squared error of head(avg_emb @ M_src) against gold, plus
    alpha times the summed squared distance between projected dictionary
    pairs. One epoch is one full-batch Adam step on the MSE term followed
    by one on the projection term. Projections start at identity, the head
    at small seeded noise (so early dev predictions are not constant), and
    the bias at the training-label mean. Epochs whose dev predictions are
    constant record NaN dev Pearson and are never selected.
    """
    if src_emb.dim != tgt_emb.dim:
        raise ValidationError(f"embedding dims differ: source {src_emb.dim}, target {tgt_emb.dim}")
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if learning_rate <= 0:
        raise ValidationError("learning_rate must be positive")
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    d = src_emb.dim
    train_gold = src_corpus.gold_vector()
    dev_gold = dev.gold_vector()
    A = np.stack([average_embedding(item.text, src_emb) for item in src_corpus])
    A_dev = np.stack([average_embedding(item.text, src_emb) for item in dev])
    S, T = _resolve_dictionary(dictionary, src_emb, tgt_emb)
    n = len(src_corpus)

    rng = np.random.Generator(np.random.PCG64(seed))
    m_src = np.eye(d)
    m_tgt = np.eye(d)
    head = rng.normal(0.0, 0.01, size=d)
    # starting the bias at the label mean removes the constant residual,
    # which Adam's per-step cap could not close within 100 epochs
    bias = np.array([float(train_gold.mean())])

    adam_src = _Adam((d, d), learning_rate)
    adam_tgt = _Adam((d, d), learning_rate)
    adam_head = _Adam((d,), learning_rate)
    adam_bias = _Adam((1,), learning_rate)

    def train_mse() -> float:
        residual = (A @ m_src) @ head + bias[0] - train_gold
        return float(np.mean(residual**2))

    def projection_loss() -> float:
        diff = S @ m_src - T @ m_tgt
        return float(np.sum(diff**2))

    initial_mse = train_mse()
    initial_projection_loss = projection_loss()

    history: list[EpochStats] = []
    best_epoch = 0
    best_dev = -math.inf
    best_params: Optional[tuple[np.ndarray, np.ndarray, np.ndarray, float]] = None
    for epoch in range(1, epochs + 1):
        # regression half-step
        projected = A @ m_src
        residual = projected @ head + bias[0] - train_gold
        grad_bias = np.array([2.0 * float(residual.mean())])
        grad_head = (2.0 / n) * projected.T @ residual
        grad_src = (2.0 / n) * np.outer(A.T @ residual, head)
        adam_src.step(m_src, grad_src)
        adam_head.step(head, grad_head)
        adam_bias.step(bias, grad_bias)

        # dictionary half-step
        diff = S @ m_src - T @ m_tgt
        adam_src.step(m_src, 2.0 * alpha * S.T @ diff)
        adam_tgt.step(m_tgt, -2.0 * alpha * T.T @ diff)

        dev_preds = (A_dev @ m_src) @ head + bias[0]
        try:
            dev_pearson = pearson(dev_preds, dev_gold)
        except MetricError:
            dev_pearson = float("nan")
        history.append(EpochStats(mse=train_mse(), projection_loss=projection_loss(), dev_pearson=dev_pearson))
        if not math.isnan(dev_pearson) and dev_pearson > best_dev:
            best_dev = dev_pearson
            best_epoch = epoch
            best_params = (m_src.copy(), m_tgt.copy(), head.copy(), float(bias[0]))

    if best_params is None:
        raise MetricError("dev predictions were constant at every epoch; no snapshot selectable")
    return BlseModel(
        m_src=best_params[0],
        m_tgt=best_params[1],
        head_weights=best_params[2],
        head_bias=best_params[3],
        alpha=alpha,
        learning_rate=learning_rate,
        seed=seed,
        best_epoch=best_epoch,
        history=history,
        initial_mse=initial_mse,
        initial_projection_loss=initial_projection_loss,
    )


def predict_blse(model: BlseModel, item: Item, emb: EmbeddingTable, side: str) -> float:
    """Score one item through the side's projection; no translation happens.

    An item with no in-vocabulary tokens projects the zero vector, so the
    prediction falls back to the head bias.
    """
    if side not in ("source", "target"):
        raise ValidationError(f"side must be 'source' or 'target', got {side!r}")
    if emb.dim != model.dim:
        raise ValidationError(f"embedding dim {emb.dim} != model dim {model.dim}")
    matrix = model.m_src if side == "source" else model.m_tgt
    projected = average_embedding(item.text, emb) @ matrix
    return float(projected @ model.head_weights + model.head_bias)


def evaluate_blse(
    model: BlseModel, corpus: Corpus, emb: EmbeddingTable, side: str
) -> tuple[float, float]:
    """(Pearson, Spearman) of side-projected predictions against gold."""
    gold = corpus.gold_vector()
    preds = np.array([predict_blse(model, item, emb, side) for item in corpus])
    return pearson(preds, gold), spearman(preds, gold)
