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

"""Scripted classifiers and small helpers shared by the unit tests."""

import hashlib
import math
from typing import Callable, Dict, Iterable, Optional, Sequence, Union

from classifier import ClassifierBackend, ClassifierHandle, ProbVector
from perturb import PerturbationStream

LABELS = ("neg", "pos")

Script = Union[Dict[str, Sequence[float]], Callable[[str], Sequence[float]]]


def scripted_handle(
    id: str,
    script: Script,
    label_names: Sequence[str] = LABELS,
    default: Optional[Sequence[float]] = None,
) -> ClassifierHandle:
    """A ClassifierHandle whose output per text comes from a dict or a function."""
    calls = []

    def provider(texts):
        calls.append(list(texts))
        out = []
        for text in texts:
            probs = script(text) if callable(script) else script.get(text, default)
            if probs is None:
                raise KeyError(f"no scripted output for {text!r}")
            out.append(ProbVector.from_scores(probs, label_names))
        return out

    handle = ClassifierHandle(id, ClassifierBackend.REMOTE, label_names, provider)
    handle.provider_calls = calls
    return handle


def hashed_probs(salt: str) -> Callable[[str], Sequence[float]]:
    """Deterministic pseudo-random 2-class output per text."""

    def script(text: str) -> Sequence[float]:
        digest = hashlib.md5(f"{salt}:{text}".encode("utf-8")).digest()
        p = 0.02 + 0.96 * (int.from_bytes(digest[:4], "big") / 2**32)
        return [p, 1.0 - p]

    return script


def q_for_kl(kl: float) -> float:
    """q such that KL([0.5, 0.5] || [q, 1 - q]) == kl, with q <= 0.5."""
    product = 0.25 * math.exp(-2.0 * kl)
    return (1.0 - math.sqrt(1.0 - 4.0 * product)) / 2.0


def scripted_stream(texts: Iterable[str]):
    """A stream factory replaying fixed candidate texts."""

    def factory(document, config, deps):
        return PerturbationStream(document, config.budget, iter(list(texts)))

    return factory
