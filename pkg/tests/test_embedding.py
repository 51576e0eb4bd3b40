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

import io

import numpy as np
import pytest

from embedding import (
    EmbeddingStore,
    cosine,
    load_embeddings,
    load_embeddings_file,
    nearest_synonyms,
)
from errors import EmbeddingFormatError


def _load(text: str, **kwargs) -> EmbeddingStore:
    return load_embeddings(io.BytesIO(text.encode("utf-8")), **kwargs)


def test_load_simple_table():
    store = _load("cat 0.1 0.2 0.3\ndog 0.1 0.25 0.3\n")
    assert store.dim == 3
    assert len(store) == 2
    assert store.tokens == ("cat", "dog")
    np.testing.assert_allclose(store.vector("dog"), [0.1, 0.25, 0.3])


def test_load_lowercases_and_skips_blank_lines():
    store = _load("Cat 1 0\n\n   \nDOG 0 1\n")
    assert "cat" in store and "CAT" in store
    assert store.tokens == ("cat", "dog")


def test_dimension_mismatch_reports_line():
    with pytest.raises(EmbeddingFormatError) as info:
        _load("cat 0.1 0.2 0.3\ndog 0.1 0.2\n")
    assert info.value.line_number == 2
    assert "line 2" in str(info.value)


def test_unparsable_float_reports_line():
    with pytest.raises(EmbeddingFormatError) as info:
        _load("cat 0.1 0.2\ndog 0.1 zero\n")
    assert info.value.line_number == 2


def test_non_finite_component_rejected():
    with pytest.raises(EmbeddingFormatError):
        _load("cat 0.1 nan\n")


def test_expected_dim_enforced():
    with pytest.raises(EmbeddingFormatError) as info:
        _load("cat 0.1 0.2\n", expected_dim=3)
    assert info.value.line_number == 1


def test_duplicate_token_keeps_first_occurrence():
    store = _load("cat 1 0\ndog 0 1\nbird 1 1\nfish 0 2\ncat 5 5\n")
    assert len(store) == 4
    np.testing.assert_allclose(store.vector("cat"), [1.0, 0.0])


def test_empty_source_rejected():
    with pytest.raises(EmbeddingFormatError):
        _load("\n\n")


def test_all_zero_vectors_rejected():
    with pytest.raises(EmbeddingFormatError):
        _load("cat 0 0\ndog 0 0\n")


def test_load_from_file(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("good 1 0\nnice 0.9 0.1\n", encoding="utf-8")
    store = load_embeddings_file(str(path))
    assert store.name == str(path)
    assert store.dim == 2


def test_cosine_examples():
    assert cosine([1, 0], [1, 0]) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == pytest.approx(0.0)
    assert cosine([1, 0], [0.9, 0.1]) == pytest.approx(0.9939, abs=1e-4)
    assert cosine([0, 0], [1, 1]) == 0.0


def test_cosine_dimension_mismatch():
    with pytest.raises(ValueError):
        cosine([1, 0], [1, 0, 0])


@pytest.fixture
def small_store():
    return EmbeddingStore.from_mapping({"a": (1.0, 0.0), "b": (0.9, 0.1), "c": (0.0, 1.0)})


def test_nearest_synonyms_examples(small_store):
    assert nearest_synonyms(small_store, "a", 1).tokens == ["b"]
    assert nearest_synonyms(small_store, "a", 5).tokens == ["b", "c"]
    assert nearest_synonyms(small_store, "zzz", 3).tokens == []


def test_nearest_synonyms_rejects_bad_L(small_store):
    with pytest.raises(ValueError):
        nearest_synonyms(small_store, "a", 0)


def test_ties_go_lexicographically():
    store = EmbeddingStore.from_mapping({"q": (1.0, 0.0), "zeta": (2.0, 0.0), "alpha": (3.0, 0.0)})
    assert nearest_synonyms(store, "q", 2).tokens == ["alpha", "zeta"]


def test_store_synonyms_is_case_insensitive_and_memoised(small_store):
    first = small_store.synonyms("A", 1)
    assert first.tokens == ["b"]
    assert small_store.synonyms("a", 1) is first


def test_synonym_lists_are_ordered_and_exclude_query():
    rng = np.random.default_rng(3)
    tokens = [f"w{i}" for i in range(200)]
    store = EmbeddingStore(tokens, rng.normal(size=(200, 8)))
    for word in tokens[:20]:
        synonyms = nearest_synonyms(store, word, 10)
        scores = [score for _, score in synonyms]
        assert word not in synonyms.tokens
        assert len(synonyms) == 10
        assert all(-1.0 <= s <= 1.0 for s in scores)
        assert scores == sorted(scores, reverse=True)


def test_synonyms_match_brute_force():
    rng = np.random.default_rng(11)
    for size in (50, 300, 1000):
        tokens = [f"t{i:04d}" for i in range(size)]
        matrix = rng.normal(size=(size, 6))
        store = EmbeddingStore(tokens, matrix)
        for query in rng.choice(size, size=5, replace=False):
            word = tokens[query]
            expected = sorted(
                (t for t in tokens if t != word),
                key=lambda t: (-cosine(matrix[query], store.vector(t)), t),
            )[:7]
            assert nearest_synonyms(store, word, 7).tokens == expected
            assert nearest_synonyms(store, word, 7, use_normalized=True).tokens == expected
