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
Semantic-preserving perturbation engines and the budgeted candidate stream.

- RP replaces up to g randomly chosen words with one of their top-L synonyms.
- SubW ranks sentences, then words, by how much they drive the two models
  apart (KL divergence) and substitutes the top g substitutable words.
- ParaPer paraphrases by round-trip translation through one or two pivot
  languages.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from classifier import ClassifierHandle
from constants import (
    DEFAULT_BUDGET,
    DEFAULT_G,
    DEFAULT_L,
    DEFAULT_METHOD,
    DEFAULT_SEED,
    DEFAULT_SOURCE_LANGUAGE,
    MAX_ENUMERATED_ASSIGNMENTS,
)
from detector import kl_divergence
from embedding import EmbeddingStore
from errors import ConfigError, ProtocolError, UnperturbableInput
from logger_config import logger
from services import Translator
from text_core import Document, Sentence, drop_token, substitute

# One substitution: (slot index, synonym index)
Assignment = FrozenSet[Tuple[int, int]]


class PerturbMethod(str, Enum):
    RP = "rp"
    SUBW = "subw"
    PARAP = "parap"


@dataclass(frozen=True)
class PerturbConfig:
    method: PerturbMethod = PerturbMethod(DEFAULT_METHOD)
    g: int = DEFAULT_G
    L: int = DEFAULT_L
    budget: int = DEFAULT_BUDGET
    languages: Tuple[str, ...] = ()
    source_language: str = DEFAULT_SOURCE_LANGUAGE
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", PerturbMethod(self.method))
        except ValueError:
            raise ConfigError(
                f"unknown perturbation method '{self.method}', "
                f"expected one of {[m.value for m in PerturbMethod]}"
            ) from None
        object.__setattr__(self, "languages", tuple(self.languages))

        if self.g < 0:
            raise ConfigError(f"g must be non-negative, got {self.g}")
        if self.g == 0 and self.method is not PerturbMethod.PARAP:
            raise ConfigError("g = 0 would only ever reproduce the input")
        if self.L < 1:
            raise ConfigError(f"L must be at least 1, got {self.L}")
        if self.budget < 1:
            raise ConfigError(f"budget must be at least 1, got {self.budget}")
        if self.method is PerturbMethod.PARAP:
            if not self.languages:
                raise ConfigError("method parap needs at least one target language")
            if len(set(self.languages)) != len(self.languages):
                raise ConfigError(f"duplicate target languages: {list(self.languages)}")
            if self.source_language in self.languages:
                raise ConfigError(
                    f"source language '{self.source_language}' cannot be a target language"
                )


@dataclass(frozen=True)
class PerturbDeps:
    """What the engines need besides the text; only the method's own deps are required."""

    store: Optional[EmbeddingStore] = None
    f1: Optional[ClassifierHandle] = None
    f2: Optional[ClassifierHandle] = None
    translator: Optional[Translator] = None
    rng: Optional[np.random.Generator] = None


@dataclass(frozen=True)
class ImportanceRanking:
    sentence_scores: Tuple[float, ...]
    # (sentence index, token index within the sentence) -> score, word tokens only
    word_scores: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def sentence_order(self) -> List[int]:
        """Most important first; ties keep document order."""
        return sorted(range(len(self.sentence_scores)), key=lambda i: -self.sentence_scores[i])

    def word_order(self, sentence_index: int) -> List[int]:
        words = [(ti, score) for (si, ti), score in self.word_scores.items() if si == sentence_index]
        return [ti for ti, _ in sorted(words, key=lambda item: (-item[1], item[0]))]


# ---------------- Substitution spaces ----------------


def _elementary_symmetric(sizes: Sequence[int], n: int) -> int:
    """Sum over all n-subsets of the product of their sizes."""
    e = [1] + [0] * n
    for size in sizes:
        for j in range(n, 0, -1):
            e[j] += e[j - 1] * size
    return e[n]


class _SubstitutionSpace:
    """
    All ways of substituting exactly n of the given slots.

    Each slot is a word position with its synonym list. Small spaces are
    enumerated and shuffled; large ones are sampled with rejection of
    assignments already tried.
    """

    def __init__(self, document: Document, slots: Sequence[Tuple[int, List[str]]], n: int):
        self.document = document
        self.slots = list(slots)
        self.n = n
        self.size = _elementary_symmetric([len(syns) for _, syns in self.slots], n)

    def draw(self, rng: np.random.Generator) -> Assignment:
        chosen = rng.choice(len(self.slots), size=self.n, replace=False)
        return frozenset(
            (int(slot), int(rng.integers(len(self.slots[int(slot)][1])))) for slot in chosen
        )

    def _enumerate(self) -> List[Assignment]:
        assignments: List[Assignment] = []
        for combo in itertools.combinations(range(len(self.slots)), self.n):
            ranges = [range(len(self.slots[slot][1])) for slot in combo]
            for picks in itertools.product(*ranges):
                assignments.append(frozenset(zip(combo, picks)))
        return assignments

    def assignments(self, rng: np.random.Generator) -> Iterator[Assignment]:
        if self.size <= MAX_ENUMERATED_ASSIGNMENTS:
            everything = self._enumerate()
            for i in rng.permutation(len(everything)):
                yield everything[int(i)]
            return

        tried: Set[Assignment] = set()
        while len(tried) < self.size:
            assignment = self.draw(rng)
            if assignment in tried:
                continue
            tried.add(assignment)
            yield assignment

    def render(self, assignment: Assignment) -> str:
        replacements = {
            self.slots[slot][0]: self.slots[slot][1][pick] for slot, pick in assignment
        }
        return substitute(self.document, replacements)


def _substitutable_slots(
    x: Document, positions: Sequence[int], store: EmbeddingStore, L: int
) -> List[Tuple[int, List[str]]]:
    slots = []
    for position in positions:
        token = x.tokens[position]
        if not token.is_word:
            continue
        synonyms = store.synonyms(token.normalized, L)
        if synonyms:
            slots.append((position, synonyms.tokens))
    return slots


def _random_space(x: Document, g: int, L: int, store: EmbeddingStore) -> _SubstitutionSpace:
    slots = _substitutable_slots(x, range(len(x.tokens)), store, L)
    if not slots:
        raise UnperturbableInput()
    return _SubstitutionSpace(x, slots, min(g, len(slots)))


def random_perturb(
    x: Document, config: PerturbConfig, store: EmbeddingStore, rng: np.random.Generator
) -> str:
    space = _random_space(x, config.g, config.L, store)
    return space.render(space.draw(rng))


# ---------------- KL-guided importance ----------------


def _pair_kl(texts: Sequence[str], f1: ClassifierHandle, f2: ClassifierHandle) -> Dict[str, float]:
    unique = list(dict.fromkeys(texts))
    if not unique:
        return {}
    first = f1.classify_batch(unique)
    second = f2.classify_batch(unique)
    return {text: kl_divergence(p, q) for text, p, q in zip(unique, first, second)}


def _has_words(text: str) -> bool:
    return any(ch.isalnum() for ch in text)


def sentence_importance(s: Sentence, f1: ClassifierHandle, f2: ClassifierHandle) -> float:
    if not s.tokens:
        raise ValueError("sentence has no tokens")
    return _pair_kl([s.text], f1, f2)[s.text]


def word_importance(s: Sentence, j: int, f1: ClassifierHandle, f2: ClassifierHandle) -> float:
    """D_KL(s) - D_KL(s without token j); an emptied sentence counts as D_KL = 0."""
    if not s.tokens[j].is_word:
        raise ValueError(f"token {j} is not a word")
    reduced = drop_token(s, j)
    if not _has_words(reduced):
        return sentence_importance(s, f1, f2)
    scores = _pair_kl([s.text, reduced], f1, f2)
    return scores[s.text] - scores[reduced]


def rank_importance(x: Document, f1: ClassifierHandle, f2: ClassifierHandle) -> ImportanceRanking:
    """Scores every sentence and every word with two batched calls per model."""
    reduced: Dict[Tuple[int, int], str] = {}
    texts: List[str] = []
    for si, sentence in enumerate(x.sentences):
        if not sentence.word_indices:
            continue
        texts.append(sentence.text)
        for ti in sentence.word_indices:
            reduced[(si, ti)] = drop_token(sentence, ti)
            if _has_words(reduced[(si, ti)]):
                texts.append(reduced[(si, ti)])

    kl = _pair_kl(texts, f1, f2)
    sentence_scores = tuple(
        kl[sentence.text] if sentence.word_indices else 0.0 for sentence in x.sentences
    )
    word_scores = {
        (si, ti): sentence_scores[si] - kl.get(text, 0.0) if _has_words(text) else sentence_scores[si]
        for (si, ti), text in reduced.items()
    }
    return ImportanceRanking(sentence_scores=sentence_scores, word_scores=word_scores)


def select_words(
    x: Document, ranking: ImportanceRanking, g: int, store: EmbeddingStore, L: int
) -> List[int]:
    """Flat positions of the top-g substitutable words, walking the sentence ranking."""
    selected: List[int] = []
    for si in ranking.sentence_order():
        for ti in ranking.word_order(si):
            if len(selected) == g:
                return selected
            token = x.sentences[si].tokens[ti]
            if store.synonyms(token.normalized, L):
                selected.append(x.flat_index(si, ti))
    return selected


def _importance_space(
    x: Document, config: PerturbConfig, f1: ClassifierHandle, f2: ClassifierHandle, store: EmbeddingStore
) -> _SubstitutionSpace:
    ranking = rank_importance(x, f1, f2)
    positions = select_words(x, ranking, config.g, store, config.L)
    if not positions:
        raise UnperturbableInput()
    slots = _substitutable_slots(x, positions, store, config.L)
    return _SubstitutionSpace(x, slots, len(slots))


def tb_perturb(
    x: Document,
    config: PerturbConfig,
    f1: ClassifierHandle,
    f2: ClassifierHandle,
    store: EmbeddingStore,
    rng: np.random.Generator,
) -> str:
    space = _importance_space(x, config, f1, f2, store)
    return space.render(space.draw(rng))


# ---------------- Round-trip translation ----------------


def language_chains(languages: Sequence[str]) -> Iterator[Tuple[str, ...]]:
    """Single pivots in configured order, then ordered pivot pairs (i, j), i != j."""
    for language in languages:
        yield (language,)
    for first, second in itertools.permutations(languages, 2):
        yield (first, second)


def para_perturb(
    x: str,
    chain: Sequence[str],
    translator: Translator,
    source_language: str = DEFAULT_SOURCE_LANGUAGE,
) -> str:
    if len(chain) not in (1, 2):
        raise ValueError(f"a translation chain has 1 or 2 pivots, got {len(chain)}")
    hops = [source_language, *chain, source_language]
    text = x
    for source, target in zip(hops, hops[1:]):
        text = translator.translate(text, source, target)
        if not text or not text.strip():
            raise ProtocolError(f"empty translation for {source}->{target}", "translator")
    return text


# ---------------- Candidate stream ----------------


class PerturbationStream:
    """
    Lazy, deduplicated candidate texts for one source text.

    Yields at most `budget` texts, never the source and never the same text
    twice. Skipped duplicates do not count against the budget. `exhausted` is
    set when the engine ran out of candidates before the budget was reached.
    """

    def __init__(self, source: Document, budget: int, candidates: Iterator[str]):
        self.source = source
        self.budget = budget
        self.emitted = 0
        self.attempted = 0
        self.exhausted = False
        self._seen: Set[str] = {source.raw}
        self._candidates = candidates

    def __iter__(self) -> "PerturbationStream":
        return self

    def __next__(self) -> str:
        if self.emitted >= self.budget:
            raise StopIteration
        for text in self._candidates:
            self.attempted += 1
            if text in self._seen:
                continue
            self._seen.add(text)
            self.emitted += 1
            return text
        self.exhausted = True
        raise StopIteration


def _substitution_candidates(space_factory, rng: np.random.Generator) -> Iterator[str]:
    try:
        space = space_factory()
    except UnperturbableInput:
        logger.debug("Input has no substitutable word, stream is empty")
        return
    logger.debug(f"Substitution space holds {space.size} assignments")
    for assignment in space.assignments(rng):
        yield space.render(assignment)


def _paraphrase_candidates(x: Document, config: PerturbConfig, translator: Translator) -> Iterator[str]:
    for chain in language_chains(config.languages):
        yield para_perturb(x.raw, chain, translator, config.source_language)


def open_stream(x: Document, config: PerturbConfig, deps: PerturbDeps) -> PerturbationStream:
    rng = deps.rng if deps.rng is not None else np.random.default_rng(config.seed)

    if config.method is PerturbMethod.PARAP:
        if deps.translator is None:
            raise ConfigError("method parap needs a translator")
        candidates = _paraphrase_candidates(x, config, deps.translator)
    elif config.method is PerturbMethod.RP:
        if deps.store is None:
            raise ConfigError("method rp needs an embedding store")
        candidates = _substitution_candidates(
            lambda: _random_space(x, config.g, config.L, deps.store), rng
        )
    else:
        if deps.store is None or deps.f1 is None or deps.f2 is None:
            raise ConfigError("method subw needs an embedding store and two models")
        candidates = _substitution_candidates(
            lambda: _importance_space(x, config, deps.f1, deps.f2, deps.store), rng
        )

    return PerturbationStream(x, config.budget, candidates)
