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

import numpy as np
import pytest

from classifier import (
    BuiltinModel,
    ClassifierHandle,
    ProbVector,
    TrainConfig,
    accuracy,
    classify,
    featurize,
    label_of,
    load_model,
    save_model,
    softmax_cross_entropy,
    train_builtin,
)
from doubles import LABELS, scripted_handle
from embedding import EmbeddingStore
from errors import DataError


@pytest.fixture
def store():
    return EmbeddingStore.from_mapping({"good": (2.0, 0.0), "bad": (0.0, 2.0)})


def _model(weights, bias, dim=2):
    return BuiltinModel(dim=dim, label_names=LABELS, weights=weights, bias=bias)


def test_prob_vector_invariants():
    with pytest.raises(ValueError):
        ProbVector((1.0,), ("only",))
    with pytest.raises(ValueError):
        ProbVector((0.5, 0.6), LABELS)
    with pytest.raises(ValueError):
        ProbVector((0.5, 0.5), ("a", "b", "c"))
    with pytest.raises(ValueError):
        ProbVector((1.5, -0.5), LABELS)


def test_prob_vector_from_scores_clamps_and_normalises():
    vector = ProbVector.from_scores([0.0, 2.0], LABELS)
    assert sum(vector.probs) == pytest.approx(1.0)
    assert vector.probs[0] > 0.0
    assert vector.K == 2


def test_label_of_examples():
    assert label_of(ProbVector((0.2, 0.8), LABELS)) == 1
    assert label_of(ProbVector((0.5, 0.5), LABELS)) == 0
    assert label_of(ProbVector((0.1, 0.3, 0.6), ("a", "b", "c"))) == 2


def test_label_of_is_invariant_under_monotone_logit_maps():
    rng = np.random.default_rng(5)
    for _ in range(200):
        logits = rng.normal(size=4)
        labels = ("a", "b", "c", "d")
        first = ProbVector.from_scores(np.exp(logits) / np.exp(logits).sum(), labels)
        scaled = 3.0 * logits + 1.0
        second = ProbVector.from_scores(np.exp(scaled) / np.exp(scaled).sum(), labels)
        assert label_of(first) == label_of(second)


def test_builtin_zero_weights_give_uniform(store):
    handle = ClassifierHandle.builtin("m", _model(np.zeros((2, 2)), np.zeros(2)), store)
    assert handle.classify("good").probs == pytest.approx((0.5, 0.5))


def test_builtin_identity_weights(store):
    handle = ClassifierHandle.builtin("m", _model(np.eye(2), np.zeros(2)), store)
    assert classify(handle, "good").probs == pytest.approx((0.8808, 0.1192), abs=1e-4)


def test_builtin_all_oov_uses_bias(store):
    handle = ClassifierHandle.builtin("m", _model(np.eye(2), np.array([0.3, -0.1])), store)
    assert handle.classify("unknown words only").probs == pytest.approx((0.5987, 0.4013), abs=1e-4)


def test_builtin_rejects_text_without_tokens(store):
    handle = ClassifierHandle.builtin("m", _model(np.eye(2), np.zeros(2)), store)
    with pytest.raises(ValueError):
        handle.classify("   ")


def test_builtin_rejects_dimension_mismatch(store):
    model = BuiltinModel(dim=3, label_names=LABELS, weights=np.zeros((2, 3)), bias=np.zeros(2))
    with pytest.raises(ValueError):
        ClassifierHandle.builtin("m", model, store)


def test_featurize_is_mean_of_known_rows(store):
    np.testing.assert_allclose(featurize("good bad unknown", store), [1.0, 1.0])
    np.testing.assert_allclose(featurize("nothing known", store), [0.0, 0.0])


def test_outputs_are_distributions_on_random_texts(store):
    rng = np.random.default_rng(2)
    model = _model(rng.normal(size=(2, 2)), rng.normal(size=2))
    handle = ClassifierHandle.builtin("m", model, store)
    words = ["good", "bad", "meh", "film", "Good!"]
    texts = [" ".join(rng.choice(words, size=int(rng.integers(1, 6)))) for _ in range(300)]
    for vector in handle.classify_batch(texts):
        assert sum(vector.probs) == pytest.approx(1.0, abs=1e-9)
        assert all(0.0 <= p <= 1.0 for p in vector.probs)


def test_handle_memoises_per_text():
    handle = scripted_handle("s", {"x": (0.3, 0.7), "y": (0.6, 0.4)})
    handle.classify_batch(["x", "y", "x"])
    handle.classify("x")
    assert handle.provider_calls == [["x", "y"]]
    assert handle.cache_misses == 2
    assert handle.cache_hits == 1


def test_handle_rejects_foreign_label_names():
    handle = scripted_handle("s", {"x": (0.3, 0.7)})
    handle.label_names = ("other", "labels")
    with pytest.raises(ValueError):
        handle.classify("x")


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    K, dim, n = 3, 4, 6
    weights = rng.normal(size=(K, dim))
    bias = rng.normal(size=K)
    features = rng.normal(size=(n, dim))
    targets = np.eye(K)[rng.integers(0, K, size=n)]
    l2 = 0.1
    _, grad_w, grad_b = softmax_cross_entropy(weights, bias, features, targets, l2)

    h = 1e-6

    def relative_error(analytic, numeric):
        return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))

    for i in range(K):
        for j in range(dim):
            plus, minus = weights.copy(), weights.copy()
            plus[i, j] += h
            minus[i, j] -= h
            numeric = (
                softmax_cross_entropy(plus, bias, features, targets, l2)[0]
                - softmax_cross_entropy(minus, bias, features, targets, l2)[0]
            ) / (2 * h)
            assert relative_error(grad_w[i, j], numeric) < 1e-4
        plus, minus = bias.copy(), bias.copy()
        plus[i] += h
        minus[i] -= h
        numeric = (
            softmax_cross_entropy(weights, plus, features, targets, l2)[0]
            - softmax_cross_entropy(weights, minus, features, targets, l2)[0]
        ) / (2 * h)
        assert relative_error(grad_b[i], numeric) < 1e-4


def _separable_dataset(rng, size=200):
    positive = ["great", "superb", "lovely"]
    negative = ["awful", "dull", "boring"]
    data = []
    for i in range(size):
        words, label = (positive, "pos") if i % 2 == 0 else (negative, "neg")
        data.append((" ".join(rng.choice(words, size=4)), label))
    return data


@pytest.fixture
def sentiment_store():
    return EmbeddingStore.from_mapping(
        {
            "great": (1.0, 0.2, 0.0),
            "superb": (0.9, 0.0, 0.3),
            "lovely": (1.1, 0.1, 0.1),
            "awful": (-1.0, 0.2, 0.0),
            "dull": (-0.8, 0.0, 0.3),
            "boring": (-1.1, 0.1, 0.1),
        }
    )


def test_training_separable_data(sentiment_store):
    data = _separable_dataset(np.random.default_rng(0))
    model = train_builtin(data, sentiment_store, TrainConfig(epochs=50, seed=3))
    assert model.label_names == ("neg", "pos")
    handle = ClassifierHandle.builtin("trained", model, sentiment_store)
    assert accuracy(handle, data) >= 0.95


def test_training_is_deterministic_per_seed(sentiment_store):
    data = _separable_dataset(np.random.default_rng(1), size=60)
    first = train_builtin(data, sentiment_store, TrainConfig(epochs=5, seed=42))
    second = train_builtin(data, sentiment_store, TrainConfig(epochs=5, seed=42))
    other = train_builtin(data, sentiment_store, TrainConfig(epochs=5, seed=43))
    assert np.array_equal(first.weights, second.weights)
    assert np.array_equal(first.bias, second.bias)
    assert not np.array_equal(first.weights, other.weights)


def test_training_preconditions(sentiment_store):
    with pytest.raises(ValueError):
        train_builtin([], sentiment_store)
    with pytest.raises(ValueError):
        train_builtin([("great", "pos"), ("awful", "neg")], sentiment_store, label_names=["pos"])
    with pytest.raises(ValueError):
        train_builtin([("great", "pos"), ("lovely", "pos")], sentiment_store)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(l2=-1.0)


def test_model_file_round_trip(tmp_path):
    model = BuiltinModel(
        dim=2,
        label_names=LABELS,
        weights=np.array([[0.25, -1.5], [3.0, 0.125]]),
        bias=np.array([0.5, -0.5]),
        embedding_ref="vectors.txt",
    )
    path = str(tmp_path / "model.json")
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.label_names == model.label_names
    assert loaded.embedding_ref == "vectors.txt"
    assert np.array_equal(loaded.weights, model.weights)
    assert np.array_equal(loaded.bias, model.bias)


def test_malformed_model_files(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(DataError):
        load_model(str(broken))

    wrong_shape = tmp_path / "shape.json"
    wrong_shape.write_text(
        json.dumps({"dim": 2, "label_names": ["a", "b"], "weights": [[1, 2]], "bias": [0, 0]}),
        encoding="utf-8",
    )
    with pytest.raises(DataError):
        load_model(str(wrong_shape))
