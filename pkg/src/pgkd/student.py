"""Reference student: hashed bag-of-n-grams feeding a multinomial logistic regression.

The student is deliberately small. Anything that exposes ``predict_proba_many``,
``taxonomy`` and works with :func:`train` can replace it in the loop.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .corpus import LabeledSample, Taxonomy
from .errors import EmptyDataset

MAX_TOKENS = 512

DEFAULT_BATCH_SIZE = 64
DEFAULT_EPOCHS = 30
DEFAULT_PATIENCE = 5


@dataclass(frozen=True)
class FeaturizerConfig:
    ngram_orders: tuple[int, ...] = (1, 2)
    dimension: int = 2**16
    hash_seed: int = 0
    max_tokens: int = MAX_TOKENS

    def __post_init__(self):
        object.__setattr__(self, "ngram_orders", tuple(sorted(set(self.ngram_orders))))
        if not self.ngram_orders or min(self.ngram_orders) < 1:
            raise ValueError("ngram_orders must be a non-empty set of positive integers")
        d = self.dimension
        if d < 2 or d & (d - 1):
            raise ValueError("dimension must be a power of two >= 2")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class StudentConfig:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    # Picked by a grid over {0.03, 0.1, 0.3, 1, 3, 10} on the synthetic 20-class
    # corpus at 200 and 2000 seed samples; 2e-5 only makes sense for BERT.
    learning_rate: float = 1.0
    patience: int = DEFAULT_PATIENCE
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")


def hash_ngram(ngram: str, config: FeaturizerConfig) -> int:
    digest = hashlib.blake2b(
        ngram.encode("utf-8"), digest_size=8, salt=config.hash_seed.to_bytes(8, "little", signed=True)
    ).digest()
    return int.from_bytes(digest, "little") & (config.dimension - 1)


def tokenize(text: str, max_tokens: int = MAX_TOKENS) -> list[str]:
    return text.lower().split()[:max_tokens]


@lru_cache(maxsize=500_000)
def _hashed_counts(text: str, config: FeaturizerConfig) -> tuple[tuple[int, ...], tuple[float, ...]]:
    tokens = tokenize(text, config.max_tokens)
    counts: dict[int, float] = {}
    for n in config.ngram_orders:
        for i in range(len(tokens) - n + 1):
            idx = hash_ngram(" ".join(tokens[i : i + n]), config)
            counts[idx] = counts.get(idx, 0.0) + 1.0
    keys = sorted(counts)
    return tuple(keys), tuple(counts[k] for k in keys)


def featurize(text: str, config: FeaturizerConfig) -> sparse.csr_matrix:
    """Sparse 1 x dimension row of hashed n-gram counts."""
    return featurize_many([text], config)


def featurize_many(texts: Sequence[str], config: FeaturizerConfig) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        idx, vals = _hashed_counts(text, config)
        indices.extend(idx)
        data.extend(vals)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), indptr),
        shape=(len(texts), config.dimension),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class StudentModel:
    weights: np.ndarray  # (n_classes, dimension)
    bias: np.ndarray  # (n_classes,)
    featurizer: FeaturizerConfig
    taxonomy: Taxonomy

    @classmethod
    def zeros(cls, taxonomy: Taxonomy, featurizer: FeaturizerConfig) -> "StudentModel":
        return cls(
            weights=np.zeros((len(taxonomy), featurizer.dimension)),
            bias=np.zeros(len(taxonomy)),
            featurizer=featurizer,
            taxonomy=taxonomy,
        )

    def copy(self) -> "StudentModel":
        return StudentModel(self.weights.copy(), self.bias.copy(), self.featurizer, self.taxonomy)

    def logits_many(self, texts: Sequence[str]) -> np.ndarray:
        X = featurize_many(texts, self.featurizer)
        return np.asarray(X @ self.weights.T) + self.bias

    def predict_proba_many(self, texts: Sequence[str]) -> np.ndarray:
        return softmax(self.logits_many(texts))

    def predict_proba(self, text: str) -> np.ndarray:
        return self.predict_proba_many([text])[0]

    def save(self, path: str | Path) -> None:
        meta = {
            "taxonomy": list(self.taxonomy.classes),
            "featurizer": asdict(self.featurizer),
        }
        buf = io.BytesIO()
        np.savez(buf, weights=self.weights, bias=self.bias, meta=np.array(json.dumps(meta)))
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "StudentModel":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            feat = meta["featurizer"]
            feat["ngram_orders"] = tuple(feat["ngram_orders"])
            return cls(
                weights=z["weights"].copy(),
                bias=z["bias"].copy(),
                featurizer=FeaturizerConfig(**feat),
                taxonomy=Taxonomy(tuple(meta["taxonomy"])),
            )


def predict_proba(model: StudentModel, text: str) -> np.ndarray:
    return model.predict_proba(text)


def cross_entropy(weights: np.ndarray, bias: np.ndarray, X, y: np.ndarray) -> float:
    logp = log_softmax(np.asarray(X @ weights.T) + bias)
    return float(-logp[np.arange(len(y)), y].mean())


def cross_entropy_grad(weights: np.ndarray, bias: np.ndarray, X, y: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. (weights, bias).

    Returns ``(loss, grad_weights, grad_bias)`` with dense gradients; the
    training loop uses a column-restricted version of the same formula.
    """
    n = len(y)
    logits = np.asarray(X @ weights.T) + bias
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = np.asarray((X.T @ delta).T)
    return loss, grad_w, delta.sum(axis=0)


def loss(model: StudentModel, samples: Sequence[LabeledSample]) -> float:
    """Mean categorical cross-entropy of ``model`` on ``samples``."""
    if not samples:
        raise EmptyDataset("loss needs at least one sample")
    X = featurize_many([s.text for s in samples], model.featurizer)
    y = np.fromiter((s.label for s in samples), dtype=np.int64, count=len(samples))
    return cross_entropy(model.weights, model.bias, X, y)


@dataclass
class TrainingLog:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch - 1]


def _design(samples: Sequence[LabeledSample], featurizer: FeaturizerConfig):
    X = featurize_many([s.text for s in samples], featurizer)
    y = np.fromiter((s.label for s in samples), dtype=np.int64, count=len(samples))
    return X, y


def _sgd_step(model: StudentModel, Xb: sparse.csr_matrix, yb: np.ndarray, lr: float) -> None:
    cols = np.unique(Xb.indices)
    Xs = Xb[:, cols]
    Ws = model.weights[:, cols]
    logits = np.asarray(Xs @ Ws.T) + model.bias
    delta = softmax(logits)
    delta[np.arange(len(yb)), yb] -= 1.0
    delta /= len(yb)
    model.weights[:, cols] = Ws - lr * np.asarray((Xs.T @ delta).T)
    model.bias -= lr * delta.sum(axis=0)


def train(
    train_set: Sequence[LabeledSample],
    val_set: Sequence[LabeledSample],
    config: StudentConfig,
    taxonomy: Taxonomy,
    featurizer: FeaturizerConfig | None = None,
    init: StudentModel | None = None,
) -> tuple[StudentModel, TrainingLog]:
    """Mini-batch SGD on mean cross-entropy with early stopping on validation loss.

    Training ends once the validation loss has failed to improve on its best
    value for more than ``config.patience`` consecutive epochs. The returned
    model is a copy of the weights from the best epoch. ``init`` warm-starts
    from an existing model instead of zeros.
    """
    if not train_set or not val_set:
        raise EmptyDataset("train and validation sets must be non-empty")
    featurizer = featurizer or (init.featurizer if init is not None else FeaturizerConfig())
    model = init.copy() if init is not None else StudentModel.zeros(taxonomy, featurizer)
    X, y = _design(train_set, featurizer)
    Xv, yv = _design(val_set, featurizer)
    rng = np.random.default_rng(config.seed)
    log = TrainingLog()
    best = model.copy()
    best_loss = math.inf
    bad_epochs = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(y))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            _sgd_step(model, X[batch], y[batch], config.learning_rate)
        log.train_losses.append(cross_entropy(model.weights, model.bias, X, y))
        val_loss = cross_entropy(model.weights, model.bias, Xv, yv)
        log.val_losses.append(val_loss)
        log.stopped_epoch = epoch
        if val_loss < best_loss:
            best_loss = val_loss
            best = model.copy()
            log.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.patience:
                break
    return best, log
