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

import math
from dataclasses import dataclass
from typing import BinaryIO, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import EmbeddingFormatError
from logger_config import logger


@dataclass(frozen=True)
class SynonymList:
    """Ranked synonyms of one query word, best first."""

    entries: Tuple[Tuple[str, float], ...] = ()

    @property
    def tokens(self) -> List[str]:
        return [token for token, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, float]]:
        return iter(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)


class EmbeddingStore:
    """
    Immutable token -> vector table keyed by lowercase token.

    Rows live in one float64 matrix; the unit-normalised copy used by the fast
    synonym path is built on first use. Synonym queries are memoised per
    (word, L) since the perturbation engines ask for the same words over and
    over.
    """

    def __init__(self, tokens: Sequence[str], matrix: np.ndarray, name: str = ""):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ValueError("matrix must have one row per token")
        if matrix.shape[1] < 1:
            raise ValueError("dim must be positive")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding vectors must be finite")
        if not np.any(matrix):
            raise ValueError("at least one embedding vector must be nonzero")

        self.name = name
        self.dim: int = int(matrix.shape[1])
        self._tokens: Tuple[str, ...] = tuple(tokens)
        self._matrix = matrix
        self._matrix.setflags(write=False)
        self._index: Dict[str, int] = {token: i for i, token in enumerate(self._tokens)}
        self._norms = np.linalg.norm(matrix, axis=1)
        self._lexical_rank = np.empty(len(self._tokens), dtype=np.int64)
        self._lexical_rank[sorted(range(len(self._tokens)), key=self._tokens.__getitem__)] = (
            np.arange(len(self._tokens))
        )
        self._normalized: Optional[np.ndarray] = None
        self._synonym_cache: Dict[Tuple[str, int], SynonymList] = {}

    @classmethod
    def from_mapping(cls, table: Dict[str, Sequence[float]], name: str = "") -> "EmbeddingStore":
        tokens = [token.lower() for token in table]
        return cls(tokens, np.array([table[t] for t in table], dtype=np.float64), name=name)

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._tokens

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def norms(self) -> np.ndarray:
        return self._norms

    @property
    def lexical_rank(self) -> np.ndarray:
        """Position of every row in lexicographic token order."""
        return self._lexical_rank

    def normalized(self) -> np.ndarray:
        if self._normalized is None:
            safe = np.where(self._norms > 0, self._norms, 1.0)
            self._normalized = self._matrix / safe[:, None]
        return self._normalized

    def __contains__(self, token: str) -> bool:
        return token.lower() in self._index

    def __len__(self) -> int:
        return len(self._tokens)

    def row(self, token: str) -> Optional[int]:
        return self._index.get(token.lower())

    def vector(self, token: str) -> Optional[np.ndarray]:
        row = self.row(token)
        return None if row is None else self._matrix[row]

    def synonyms(self, word: str, L: int) -> SynonymList:
        key = (word.lower(), L)
        cached = self._synonym_cache.get(key)
        if cached is None:
            cached = nearest_synonyms(self, word, L)
            self._synonym_cache[key] = cached
        return cached


def load_embeddings(
    source: BinaryIO, expected_dim: Optional[int] = None, name: str = ""
) -> EmbeddingStore:
    """Reads "token v1 v2 ... vD" lines into an EmbeddingStore.

    The dimension comes from the first line unless expected_dim is given.
    Duplicate tokens keep their first occurrence.
    """
    tokens: List[str] = []
    rows: List[List[float]] = []
    seen: Dict[str, int] = {}
    dim = expected_dim

    for line_number, raw_line in enumerate(source, start=1):
        try:
            line = raw_line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise EmbeddingFormatError(f"invalid UTF-8: {e}", line_number) from e
        line = line.rstrip("\r\n")
        if not line.strip():
            continue

        fields = line.split(" ")
        token, values = fields[0], fields[1:]
        if not token:
            raise EmbeddingFormatError("missing token", line_number)
        if dim is None:
            dim = len(values)
            if dim < 1:
                raise EmbeddingFormatError("no vector components", line_number)
        if len(values) != dim:
            raise EmbeddingFormatError(
                f"expected {dim} components, found {len(values)}", line_number
            )
        try:
            vector = [float(v) for v in values]
        except ValueError as e:
            raise EmbeddingFormatError(f"unparsable float: {e}", line_number) from e
        if not all(math.isfinite(v) for v in vector):
            raise EmbeddingFormatError("non-finite component", line_number)

        key = token.lower()
        if key in seen:
            logger.debug(
                f"Duplicate embedding token '{key}' on line {line_number}, keeping line {seen[key]}"
            )
            continue
        seen[key] = line_number
        tokens.append(key)
        rows.append(vector)

    if not rows:
        raise EmbeddingFormatError("embedding source holds no vectors")

    try:
        store = EmbeddingStore(tokens, np.array(rows, dtype=np.float64), name=name)
    except ValueError as e:
        raise EmbeddingFormatError(str(e)) from e
    logger.info(f"Loaded {len(store)} embeddings of dim {store.dim}")
    return store


def load_embeddings_file(path: str, expected_dim: Optional[int] = None) -> EmbeddingStore:
    with open(path, "rb") as f:
        return load_embeddings(f, expected_dim=expected_dim, name=path)


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity; a zero vector on either side gives 0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def nearest_synonyms(
    store: EmbeddingStore, word: str, L: int, use_normalized: bool = False
) -> SynonymList:
    """Top-L tokens by cosine to word, excluding word; ties go lexicographically.

    An out-of-vocabulary word yields an empty list.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    query_row = store.row(word)
    if query_row is None:
        return SynonymList()

    query_norm = store.norms[query_row]
    if query_norm == 0.0:
        scores = np.zeros(len(store))
    elif use_normalized:
        scores = store.normalized() @ store.normalized()[query_row]
    else:
        dots = store.matrix @ store.matrix[query_row]
        denom = store.norms * query_norm
        scores = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    scores = np.clip(scores, -1.0, 1.0)

    # Primary key: descending score; secondary: token order
    order = np.lexsort((store.lexical_rank, -scores))
    picked: List[int] = []
    for i in order:
        if i == query_row:
            continue
        picked.append(int(i))
        if len(picked) == L:
            break
    return SynonymList(
        entries=tuple((store.tokens[i], float(scores[i])) for i in picked)
    )
