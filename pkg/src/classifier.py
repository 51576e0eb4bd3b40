# Copyright 2026 Chan Alston

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from PySide6.QtCore import QMutex
from scipy.special import softmax

from constants import PROB_FLOOR, PROB_SUM_TOLERANCE
from embedding import EmbeddingStore
from errors import DataError
from logger_config import logger
from text_core import tokenize

_MAX_CACHED_VECTORS = 50_000


class ClassifierBackend(str, Enum):
    BUILTIN = "builtin"
    REMOTE = "remote"


@dataclass(frozen=True)
class ProbVector:
    """A probability distribution over a task's labels."""

    probs: Tuple[float, ...]
    label_names: Tuple[str, ...]

    def __post_init__(self):
        if len(self.probs) < 2:
            raise ValueError("a probability vector needs at least 2 classes")
        if len(self.probs) != len(self.label_names):
            raise ValueError(
                f"{len(self.probs)} probabilities for {len(self.label_names)} labels"
            )
        if any(not (0.0 <= p <= 1.0) for p in self.probs):
            raise ValueError(f"probabilities outside [0, 1]: {self.probs}")
        if abs(math.fsum(self.probs) - 1.0) > PROB_SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {math.fsum(self.probs)}")

    @classmethod
    def from_scores(cls, values: Sequence[float], label_names: Sequence[str]) -> "ProbVector":
        """Clamps to [PROB_FLOOR, 1] and renormalises."""
        arr = np.clip(np.asarray(values, dtype=np.float64), PROB_FLOOR, 1.0)
        arr = arr / arr.sum()
        return cls(probs=tuple(float(p) for p in arr), label_names=tuple(label_names))

    @property
    def K(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


def label_of(p: ProbVector) -> int:
    """Argmax index; ties go to the lowest index."""
    return int(np.argmax(p.as_array()))


@dataclass
class BuiltinModel:
    """Multinomial logistic regression over mean token embeddings."""

    dim: int
    label_names: Tuple[str, ...]
    weights: np.ndarray  # K x dim
    bias: np.ndarray  # K
    embedding_ref: str = ""

    def __post_init__(self):
        self.label_names = tuple(self.label_names)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        K = len(self.label_names)
        if K < 2:
            raise ValueError("a model needs at least 2 labels")
        if self.weights.shape != (K, self.dim):
            raise ValueError(f"weights must be {K}x{self.dim}, got {self.weights.shape}")
        if self.bias.shape != (K,):
            raise ValueError(f"bias must have {K} entries, got {self.bias.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "label_names": list(self.label_names),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "embedding_ref": self.embedding_ref,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BuiltinModel":
        return cls(
            dim=int(data["dim"]),
            label_names=tuple(data["label_names"]),
            weights=np.array(data["weights"], dtype=np.float64),
            bias=np.array(data["bias"], dtype=np.float64),
            embedding_ref=str(data.get("embedding_ref", "")),
        )


def save_model(model: BuiltinModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f)
        f.write("\n")
    logger.info(f"Model written to {path}")


def load_model(path: str) -> BuiltinModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"model file '{path}' is not valid JSON: {e}") from e
    try:
        return BuiltinModel.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"model file '{path}' is malformed: {e}") from e


def featurize(text: str, store: EmbeddingStore) -> np.ndarray:
    """Mean embedding of the in-vocabulary tokens; zero vector if none are known."""
    rows = [store.row(token.normalized) for token in tokenize(text)]
    rows = [r for r in rows if r is not None]
    if not rows:
        return np.zeros(store.dim)
    return store.matrix[rows].mean(axis=0)


def create_builtin_provider(
    model: BuiltinModel, store: EmbeddingStore
) -> Callable[[List[str]], List[ProbVector]]:
    """
    Returns a callable that scores a batch of texts with a built-in model.

    Args:
        model (BuiltinModel): The trained parameters.
        store (EmbeddingStore): The embedding table the model was trained on.

    Returns:
        Callable[[List[str]], List[ProbVector]]: one ProbVector per text, in order.
    """
    if store.dim != model.dim:
        raise ValueError(
            f"model expects dim {model.dim} but the embedding store has dim {store.dim}"
        )

    def builtin_provider_func(texts: List[str]) -> List[ProbVector]:
        for text in texts:
            if not tokenize(text):
                raise ValueError("cannot classify a text without tokens")
        features = np.stack([featurize(text, store) for text in texts])
        logits = features @ model.weights.T + model.bias
        probs = softmax(logits, axis=1)
        return [ProbVector.from_scores(row, model.label_names) for row in probs]

    return builtin_provider_func


def create_remote_provider(client) -> Callable[[List[str]], List[ProbVector]]:
    """Returns a callable that forwards batches to a RemoteClassifierClient."""

    def remote_provider_func(texts: List[str]) -> List[ProbVector]:
        return client.classify_remote(texts)

    return remote_provider_func


class ClassifierHandle:
    """
    The classifier every algorithm talks to: text in, ProbVector out.

    The actual scoring is done by a provider callable (built-in model or remote
    backend), so detection and repair never care where a model lives. Results
    are memoised per text; the memo is shared by all worker threads.
    """

    def __init__(
        self,
        id: str,
        backend: ClassifierBackend,
        label_names: Sequence[str],
        _predict_provider: Callable[[List[str]], List[ProbVector]],
    ):
        self.id = id
        self.backend = backend
        self.label_names: Tuple[str, ...] = tuple(label_names)
        self._predict_provider = _predict_provider
        self._cache: "OrderedDict[str, ProbVector]" = OrderedDict()
        self._mutex = QMutex()
        self.cache_hits = 0
        self.cache_misses = 0

    @classmethod
    def builtin(cls, id: str, model: BuiltinModel, store: EmbeddingStore) -> "ClassifierHandle":
        return cls(
            id=id,
            backend=ClassifierBackend.BUILTIN,
            label_names=model.label_names,
            _predict_provider=create_builtin_provider(model, store),
        )

    @classmethod
    def remote(cls, id: str, client, label_names: Sequence[str]) -> "ClassifierHandle":
        return cls(
            id=id,
            backend=ClassifierBackend.REMOTE,
            label_names=label_names,
            _predict_provider=create_remote_provider(client),
        )

    def classify(self, text: str) -> ProbVector:
        return self.classify_batch([text])[0]

    def classify_batch(self, texts: Sequence[str]) -> List[ProbVector]:
        results: List[Optional[ProbVector]] = [None] * len(texts)
        missing: List[str] = []

        self._mutex.lock()
        try:
            for i, text in enumerate(texts):
                hit = self._cache.get(text)
                if hit is not None:
                    self._cache.move_to_end(text)
                    results[i] = hit
                    self.cache_hits += 1
                elif text not in missing:
                    missing.append(text)
        finally:
            self._mutex.unlock()

        if missing:
            vectors = self._predict_provider(missing)
            if len(vectors) != len(missing):
                raise ValueError(
                    f"classifier {self.id} returned {len(vectors)} vectors for {len(missing)} texts"
                )
            fresh = dict(zip(missing, vectors))
            self._mutex.lock()
            try:
                self.cache_misses += len(missing)
                for text, vector in fresh.items():
                    if vector.label_names != self.label_names:
                        raise ValueError(
                            f"classifier {self.id} answered with labels {vector.label_names}"
                        )
                    self._cache[text] = vector
                while len(self._cache) > _MAX_CACHED_VECTORS:
                    self._cache.popitem(last=False)
            finally:
                self._mutex.unlock()
            for i, text in enumerate(texts):
                if results[i] is None:
                    results[i] = fresh[text]

        return results  # type: ignore[return-value]

    def __repr__(self) -> str:
        return f"ClassifierHandle(id='{self.id}', backend={self.backend.value}, labels={list(self.label_names)})"


def classify(model: ClassifierHandle, text: str) -> ProbVector:
    return model.classify(text)


# ---------------- Training ----------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.5
    seed: int = 0
    batch_size: int = 32
    l2: float = 0.0
    # Std-dev of the seeded normal initialisation of the weights
    init_scale: float = 0.01

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.l2 < 0 or self.init_scale < 0:
            raise ValueError("l2 and init_scale must be non-negative")


def softmax_cross_entropy(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    l2: float = 0.0,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy loss and its analytic gradients (dW, db).

    targets is the one-hot label matrix (n x K).
    """
    n = features.shape[0]
    probs = softmax(features @ weights.T + bias, axis=1)
    loss = -float(np.sum(targets * np.log(np.clip(probs, PROB_FLOOR, 1.0)))) / n
    loss += 0.5 * l2 * float(np.sum(weights * weights))
    residual = (probs - targets) / n
    grad_w = residual.T @ features + l2 * weights
    grad_b = residual.sum(axis=0)
    return loss, grad_w, grad_b


def train_builtin(
    dataset: Sequence[Tuple[str, str]],
    store: EmbeddingStore,
    config: TrainConfig = TrainConfig(),
    label_names: Optional[Sequence[str]] = None,
    embedding_ref: str = "",
) -> BuiltinModel:
    """Fits a BuiltinModel by mini-batch gradient descent; deterministic per seed."""
    if not dataset:
        raise ValueError("cannot train on an empty dataset")

    labels = [label for _, label in dataset]
    names = tuple(label_names) if label_names is not None else tuple(sorted(set(labels)))
    index_of = {name: i for i, name in enumerate(names)}
    unknown = sorted(set(labels) - set(index_of))
    if unknown:
        raise ValueError(f"labels outside the declared label set: {unknown}")
    if len(set(labels)) < 2:
        raise ValueError("training needs at least 2 distinct labels")

    features = np.stack([featurize(text, store) for text, _ in dataset])
    targets = np.zeros((len(dataset), len(names)))
    targets[np.arange(len(dataset)), [index_of[label] for label in labels]] = 1.0

    rng = np.random.default_rng(config.seed)
    weights = rng.normal(0.0, config.init_scale, size=(len(names), store.dim))
    bias = np.zeros(len(names))

    n = len(dataset)
    loss = float("nan")
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad_w, grad_b = softmax_cross_entropy(
                weights, bias, features[batch], targets[batch], config.l2
            )
            weights -= config.learning_rate * grad_w
            bias -= config.learning_rate * grad_b
        if (epoch + 1) % 25 == 0:
            logger.debug(f"epoch {epoch + 1}/{config.epochs}: last batch loss {loss:.5f}")

    logger.info(
        f"Trained built-in model on {n} texts, {len(names)} labels, seed {config.seed}"
    )
    return BuiltinModel(
        dim=store.dim,
        label_names=names,
        weights=weights,
        bias=bias,
        embedding_ref=embedding_ref or store.name,
    )


def accuracy(handle: ClassifierHandle, dataset: Sequence[Tuple[str, str]]) -> float:
    if not dataset:
        return 0.0
    vectors = handle.classify_batch([text for text, _ in dataset])
    correct = sum(
        1
        for vector, (_, label) in zip(vectors, dataset)
        if handle.label_names[label_of(vector)] == label
    )
    return correct / len(dataset)
