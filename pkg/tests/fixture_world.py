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

"""
A small synthetic sentiment world: a 50-word embedding table, a labelled corpus
and two built-in classifiers trained on it with different seeds.

Layout of the 18 embedding dimensions:
    0       sentiment (+ for "pos" words, - for "neg" words)
    1..8    one topic axis per concept group
    9       neutral axis ("movie", "film")
    10..17  one rare axis per concept group, never seen during training

Every concept group has four clean words that are near-synonyms of each other
and two rare variants: a clean word plus a large offset on the group's rare
axis. The classifiers never learn weights for the rare axes, so a rare variant
moves each model by its own random initial weights. That is what makes a
synonym attack fool one model while the other disagrees.
"""

import json
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from classifier import BuiltinModel, ClassifierHandle, TrainConfig, train_builtin
from embedding import EmbeddingStore

DIM = 18
CONCEPTS = 8
TOPIC_WEIGHT = 5.0
RARE_OFFSET = 40.0
CLEAN_STRENGTHS = (1.0, 0.95, 0.9, 0.85)
CLEAN_SUFFIXES = ("a", "b", "c", "d")
WORDS_PER_TEXT = 5
CORPUS_SIZE = 400
TRAIN_CONFIG = dict(epochs=30, learning_rate=0.5, batch_size=32, l2=0.0, init_scale=1.0)


def _polarity(concept: int) -> str:
    return "pos" if concept < CONCEPTS // 2 else "neg"


def clean_words(concept: int) -> List[str]:
    return [f"{_polarity(concept)}{concept}{suffix}" for suffix in CLEAN_SUFFIXES]


def rare_words(concept: int) -> List[str]:
    return [f"{_polarity(concept)}{concept}rareup", f"{_polarity(concept)}{concept}raredown"]


def build_table() -> Dict[str, List[float]]:
    table: Dict[str, List[float]] = {}
    for concept in range(CONCEPTS):
        sign = 1.0 if _polarity(concept) == "pos" else -1.0
        for word, strength in zip(clean_words(concept), CLEAN_STRENGTHS):
            vector = np.zeros(DIM)
            vector[0] = sign * strength
            vector[1 + concept] = TOPIC_WEIGHT
            table[word] = vector.tolist()
        for word, offset in zip(rare_words(concept), (RARE_OFFSET, -RARE_OFFSET)):
            vector = np.zeros(DIM)
            vector[0] = sign
            vector[1 + concept] = TOPIC_WEIGHT
            vector[10 + concept] = offset
            table[word] = vector.tolist()

    movie = np.zeros(DIM)
    movie[9] = 3.0
    table["movie"] = movie.tolist()
    table["film"] = (movie * 0.8).tolist()
    return table


def build_corpus(rng: np.random.Generator, size: int = CORPUS_SIZE) -> List[Tuple[str, str]]:
    """Texts of five clean words from the concept groups of one polarity."""
    corpus = []
    for i in range(size):
        label = "pos" if i % 2 == 0 else "neg"
        concepts = range(CONCEPTS // 2) if label == "pos" else range(CONCEPTS // 2, CONCEPTS)
        vocabulary = [word for concept in concepts for word in clean_words(concept)]
        words = rng.choice(vocabulary, size=WORDS_PER_TEXT)
        corpus.append((" ".join(str(w) for w in words), label))
    return corpus


@dataclass
class FixtureWorld:
    store: EmbeddingStore
    corpus: List[Tuple[str, str]]
    model1: BuiltinModel
    model2: BuiltinModel

    def handles(self) -> Tuple[ClassifierHandle, ClassifierHandle]:
        return (
            ClassifierHandle.builtin("f1", self.model1, self.store),
            ClassifierHandle.builtin("f2", self.model2, self.store),
        )


def build_world(seed: int = 0) -> FixtureWorld:
    store = EmbeddingStore.from_mapping(build_table(), name="fixture")
    corpus = build_corpus(np.random.default_rng(seed))
    model1 = train_builtin(corpus, store, TrainConfig(seed=seed + 1, **TRAIN_CONFIG))
    model2 = train_builtin(corpus, store, TrainConfig(seed=seed + 2, **TRAIN_CONFIG))
    return FixtureWorld(store=store, corpus=corpus, model1=model1, model2=model2)


def write_embeddings(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for token, vector in zip(store.tokens, store.matrix):
            f.write(token + " " + " ".join(repr(float(x)) for x in vector) + "\n")


def write_jsonl(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
