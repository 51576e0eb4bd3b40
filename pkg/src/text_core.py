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
Deterministic tokenization, sentence splitting and detokenization.

Tokens are whitespace separated chunks with leading/trailing punctuation peeled
off into one token per character. Sentences end after '.', '!' or '?' when the
terminator is followed by whitespace or the end of the text. Abbreviations are
not special-cased, so "Dr. Smith" splits after "Dr.".

Every token and sentence keeps its character span into the original text, which
is what lets detokenize() put substituted words back with the original spacing.
"""

import dataclasses
import re
from dataclasses import dataclass
from functools import cached_property
from typing import FrozenSet, List, Mapping, Sequence, Tuple

_CHUNK_RE = re.compile(r"\S+")
_TERMINATORS = frozenset(".!?")


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    char_span: Tuple[int, int]
    is_word: bool

    @classmethod
    def from_surface(cls, surface: str, char_span: Tuple[int, int]) -> "Token":
        return cls(
            surface=surface,
            normalized=surface.lower(),
            char_span=char_span,
            is_word=any(ch.isalnum() for ch in surface),
        )

    def with_surface(self, surface: str) -> "Token":
        """Returns a copy carrying a substituted surface at the same span."""
        return dataclasses.replace(
            self,
            surface=surface,
            normalized=surface.lower(),
            is_word=any(ch.isalnum() for ch in surface),
        )


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[Token, ...]
    char_span: Tuple[int, int]
    # raw[char_span[0]:char_span[1]] of the owning document
    text: str = ""

    @property
    def word_indices(self) -> List[int]:
        return [i for i, token in enumerate(self.tokens) if token.is_word]


@dataclass(frozen=True)
class Document:
    raw: str
    sentences: Tuple[Sentence, ...]

    @cached_property
    def tokens(self) -> Tuple[Token, ...]:
        return tuple(token for sentence in self.sentences for token in sentence.tokens)

    @cached_property
    def sentence_offsets(self) -> Tuple[int, ...]:
        """Flat index of the first token of every sentence."""
        offsets = []
        total = 0
        for sentence in self.sentences:
            offsets.append(total)
            total += len(sentence.tokens)
        return tuple(offsets)

    @cached_property
    def sentence_initial_words(self) -> FrozenSet[int]:
        initial = set()
        for offset, sentence in zip(self.sentence_offsets, self.sentences):
            for i, token in enumerate(sentence.tokens):
                if token.is_word:
                    initial.add(offset + i)
                    break
        return frozenset(initial)

    def sentence_text(self, index: int) -> str:
        start, end = self.sentences[index].char_span
        return self.raw[start:end]

    def flat_index(self, sentence_index: int, token_index: int) -> int:
        return self.sentence_offsets[sentence_index] + token_index


def _tokenize_range(text: str, start: int, end: int) -> List[Token]:
    tokens: List[Token] = []
    for match in _CHUNK_RE.finditer(text, start, end):
        left, right = match.span()

        leading: List[int] = []
        while left < right and not text[left].isalnum():
            leading.append(left)
            left += 1

        trailing: List[int] = []
        while right > left and not text[right - 1].isalnum():
            right -= 1
            trailing.append(right)

        for pos in leading:
            tokens.append(Token.from_surface(text[pos], (pos, pos + 1)))
        if left < right:
            tokens.append(Token.from_surface(text[left:right], (left, right)))
        for pos in reversed(trailing):
            tokens.append(Token.from_surface(text[pos], (pos, pos + 1)))
    return tokens


def tokenize(text: str) -> List[Token]:
    """Splits text on whitespace and peels leading/trailing punctuation."""
    return _tokenize_range(text, 0, len(text))


def split_sentences(text: str) -> Document:
    boundaries: List[int] = []
    for i, ch in enumerate(text):
        if ch in _TERMINATORS and (i + 1 == len(text) or text[i + 1].isspace()):
            boundaries.append(i + 1)

    segments: List[Tuple[int, int]] = []
    start = 0
    for boundary in boundaries:
        segments.append((start, boundary))
        start = boundary
    if start < len(text):
        segments.append((start, len(text)))

    sentences: List[Sentence] = []
    for seg_start, seg_end in segments:
        # Separators between sentences stay outside the spans
        while seg_start < seg_end and text[seg_start].isspace():
            seg_start += 1
        while seg_end > seg_start and text[seg_end - 1].isspace():
            seg_end -= 1
        if seg_start < seg_end:
            sentences.append(
                Sentence(
                    tokens=tuple(_tokenize_range(text, seg_start, seg_end)),
                    char_span=(seg_start, seg_end),
                    text=text[seg_start:seg_end],
                )
            )

    if not sentences and text:
        # Whitespace-only text is still one (empty) sentence
        sentences.append(Sentence(tokens=(), char_span=(0, len(text)), text=text))

    return Document(raw=text, sentences=tuple(sentences))


def _transfer_capitalization(original: str, replacement: str) -> str:
    if original[:1].isupper() and replacement[:1].islower():
        return replacement[0].upper() + replacement[1:]
    return replacement


def detokenize(tokens: Sequence[Token], original: Document) -> str:
    """Rebuilds text from tokens aligned one-to-one with original.tokens."""
    originals = original.tokens
    if len(tokens) != len(originals):
        raise ValueError(
            f"Token count mismatch: got {len(tokens)}, original has {len(originals)}"
        )

    raw = original.raw
    initial = original.sentence_initial_words
    pieces: List[str] = []
    cursor = 0
    for index, (token, old) in enumerate(zip(tokens, originals)):
        start, end = old.char_span
        pieces.append(raw[cursor:start])
        surface = token.surface
        if surface != old.surface and index in initial:
            surface = _transfer_capitalization(old.surface, surface)
        pieces.append(surface)
        cursor = end
    pieces.append(raw[cursor:])
    return "".join(pieces)


def substitute(document: Document, replacements: Mapping[int, str]) -> str:
    """Replaces the surfaces at the given flat token indices and detokenizes."""
    tokens = list(document.tokens)
    for index, surface in replacements.items():
        tokens[index] = tokens[index].with_surface(surface)
    return detokenize(tokens, document)


def drop_token(sentence: Sentence, token_index: int) -> str:
    """Returns the sentence text with a single token removed.

    One whitespace run around the removed token is kept so the neighbours do
    not run into each other.
    """
    offset = sentence.char_span[0]
    tok_start, tok_end = sentence.tokens[token_index].char_span
    left = sentence.text[: tok_start - offset]
    right = sentence.text[tok_end - offset :]

    if not left:
        right = right.lstrip()
    elif not right:
        left = left.rstrip()
    elif left[-1].isspace() and right[0].isspace():
        right = right.lstrip()
    return left + right
