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

import time
from dataclasses import dataclass, field
from enum import Enum
from collections import Counter
from typing import Callable, List, Optional, Set, Tuple, Union

from constants import DEFAULT_FSST_SAMPLES
from detector import DetectionVerdict, DetectorConfig, detect
from errors import ConfigError, RepairAborted, TransportError
from logger_config import logger
from perturb import PerturbConfig, PerturbDeps, PerturbationStream, open_stream
from text_core import Document, split_sentences
from voting import (
    SprtOutcome,
    SprtParams,
    SprtState,
    fsst_decide,
    fsst_interval,
    hyp_test,
    sprt_log_ratio,
)

StreamFactory = Callable[[Document, PerturbConfig, PerturbDeps], PerturbationStream]


class VotingStrategy(str, Enum):
    SPRT = "sprt"
    FSST = "fsst"


@dataclass(frozen=True)
class RepairConfig:
    detector: DetectorConfig
    perturb: PerturbConfig
    sprt: SprtParams = SprtParams()
    voting: VotingStrategy = VotingStrategy.SPRT
    # Filtered candidates collected before a fixed-size vote
    fsst_samples: int = DEFAULT_FSST_SAMPLES
    trace: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "voting", VotingStrategy(self.voting))
        except ValueError:
            raise ConfigError(
                f"unknown voting strategy '{self.voting}', "
                f"expected one of {[v.value for v in VotingStrategy]}"
            ) from None
        if self.fsst_samples < 1:
            raise ConfigError(f"fsst_samples must be at least 1, got {self.fsst_samples}")
        if self.voting is VotingStrategy.FSST and self.fsst_samples > self.perturb.budget:
            raise ConfigError(
                f"fsst_samples ({self.fsst_samples}) cannot exceed the budget ({self.perturb.budget})"
            )

    @property
    def label_names(self):
        return self.detector.label_names


@dataclass(frozen=True)
class Candidate:
    text: str
    label: int
    d_kl: float
    # Position in the stream, counting every generated candidate
    index: int


@dataclass
class CandidateSet:
    accepted: List[Candidate] = field(default_factory=list)
    rejected_adversarial: int = 0

    def add(self, candidate: Candidate) -> None:
        self.accepted.append(candidate)

    def first_with_label(self, label: int) -> Optional[Candidate]:
        return next((c for c in self.accepted if c.label == label), None)

    def labels(self) -> List[int]:
        return [c.label for c in self.accepted]

    def __len__(self) -> int:
        return len(self.accepted)


@dataclass(frozen=True)
class TraceEntry:
    k: int
    label: str
    log_ratio: float
    outcome: str

    def to_dict(self) -> dict:
        return {"k": self.k, "label": self.label, "log_ratio": self.log_ratio, "outcome": self.outcome}


@dataclass
class RepairStats:
    candidates_generated: int = 0
    # Members of X*, i.e. candidates that passed the detector
    candidates_filtered: int = 0
    labels_rejected: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    detect_time: float = 0.0
    repair_time: float = 0.0
    translation_calls: int = 0
    provider_latency: float = 0.0
    trace: List[TraceEntry] = field(default_factory=list)
    # Fixed-size vote only: the leading label and its Clopper-Pearson interval
    vote_label: Optional[str] = None
    vote_interval: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class NotAdversarial:
    text: str
    verdict: DetectionVerdict
    stats: RepairStats

    decision = "not_adversarial"


@dataclass(frozen=True)
class Repaired:
    text: str
    label: int
    label_name: str
    verdict: DetectionVerdict
    stats: RepairStats

    decision = "accepted"


@dataclass(frozen=True)
class Unrepaired:
    # The original input, returned unchanged
    text: str
    verdict: DetectionVerdict
    stats: RepairStats

    decision = "budget_exhausted"


RepairOutcome = Union[NotAdversarial, Repaired, Unrepaired]


def _translation_counters(deps: PerturbDeps):
    translator = deps.translator
    if translator is None:
        return 0, 0.0
    return getattr(translator, "calls", 0), getattr(translator, "latency_seconds", 0.0)


def _record_vote_interval(
    stats: RepairStats, labels: List[int], excluded: Set[int], names, alpha: float
) -> None:
    counts = Counter(label for label in labels if label not in excluded)
    if not counts:
        return
    leader = min(counts, key=lambda label: (-counts[label], label))
    stats.vote_label = names[leader]
    stats.vote_interval = fsst_interval(labels, leader, alpha)
    logger.debug(
        f"Fixed-size vote: '{names[leader]}' on {counts[leader]}/{len(labels)}, "
        f"interval [{stats.vote_interval[0]:.4f}, {stats.vote_interval[1]:.4f}]"
    )


def repair(
    x: str,
    config: RepairConfig,
    deps: PerturbDeps,
    stream_factory: StreamFactory = open_stream,
) -> RepairOutcome:
    """
    Detects whether x is adversarial and, if so, votes for its label over
    perturbed candidates.

    Candidates flagged by the detector are dropped. Every label observed on the
    remaining candidates is tested lazily; the first accepted label wins and the
    earliest candidate carrying it is returned. A label both models already give
    to x is rejected up front.

    Args:
        x (str): The input text.
        config (RepairConfig): Detector, perturbation and voting settings.
        deps (PerturbDeps): Embeddings, models, translator and RNG for the stream.
        stream_factory: Builds the candidate stream (replaceable in tests).

    Returns:
        RepairOutcome: NotAdversarial, Repaired or Unrepaired.

    Raises:
        RepairAborted: A backend failed; carries the stats gathered so far.
    """
    started = time.perf_counter()
    stats = RepairStats()
    calls_before, latency_before = _translation_counters(deps)
    names = config.label_names

    def finish(outcome_cls, **kwargs):
        now = time.perf_counter()
        stats.wall_time = now - started
        stats.repair_time = stats.wall_time - stats.detect_time
        calls_after, latency_after = _translation_counters(deps)
        stats.translation_calls = calls_after - calls_before
        stats.provider_latency = latency_after - latency_before
        return outcome_cls(stats=stats, **kwargs)

    try:
        verdict = detect(x, config.detector)
        stats.detect_time = time.perf_counter() - started
        if not verdict.adversarial:
            return finish(NotAdversarial, text=x, verdict=verdict)

        rejected: Set[int] = set()
        witnessed: List[int] = []
        if verdict.labels_agree:
            rejected.add(verdict.labels[0])
            stats.labels_rejected.append(names[verdict.labels[0]])
        else:
            witnessed.extend(sorted(set(verdict.labels)))

        state = SprtState()
        pool = CandidateSet()
        stream = stream_factory(split_sentences(x), config.perturb, deps)

        for index, y in enumerate(stream):
            stats.candidates_generated += 1
            check = detect(y, config.detector)
            if check.adversarial:
                pool.rejected_adversarial += 1
                continue

            label = check.labels[0]
            pool.add(Candidate(text=y, label=label, d_kl=check.d_kl, index=index))
            stats.candidates_filtered += 1
            state.observe(label)
            if label not in witnessed and label not in rejected:
                witnessed.append(label)

            if config.voting is VotingStrategy.FSST:
                if len(pool) >= config.fsst_samples:
                    break
                continue

            for c in witnessed:
                if c in rejected:
                    continue
                outcome = hyp_test(c, state, config.sprt)
                if config.trace:
                    stats.trace.append(
                        TraceEntry(
                            k=state.k,
                            label=names[c],
                            log_ratio=sprt_log_ratio(state.count(c), state.k, config.sprt),
                            outcome=outcome.value,
                        )
                    )
                if outcome is SprtOutcome.ACCEPT_H0:
                    winner = pool.first_with_label(c)
                    logger.debug(
                        f"Accepted label '{names[c]}' after {state.k} filtered candidates"
                    )
                    return finish(
                        Repaired, text=winner.text, label=c, label_name=names[c], verdict=verdict
                    )
                if outcome is SprtOutcome.REJECT_H0:
                    rejected.add(c)
                    stats.labels_rejected.append(names[c])
                    logger.debug(f"Rejected label '{names[c]}' after {state.k} filtered candidates")

            if len(rejected) == len(names):
                logger.debug("Every label is rejected, stopping early")
                break

        if config.voting is VotingStrategy.FSST and len(pool):
            _record_vote_interval(stats, pool.labels(), rejected, names, config.sprt.alpha)
            winner_label = fsst_decide(pool.labels(), config.sprt.rho, excluded=rejected)
            if winner_label is not None:
                winner = pool.first_with_label(winner_label)
                return finish(
                    Repaired,
                    text=winner.text,
                    label=winner_label,
                    label_name=names[winner_label],
                    verdict=verdict,
                )

        return finish(Unrepaired, text=x, verdict=verdict)
    except TransportError as e:
        stats.wall_time = time.perf_counter() - started
        raise RepairAborted(f"repair aborted: {e}", stats=stats, cause=e) from e


@dataclass(frozen=True)
class VotingRate:
    rate: float
    correct: int
    total: int
    # Set when the stream ended before the requested number of candidates
    exhausted: bool

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "correct": self.correct,
            "total": self.total,
            "exhausted": self.exhausted,
        }


def voting_hypothesis_rate(
    x_adv: str,
    truth: Union[int, str],
    config: RepairConfig,
    deps: PerturbDeps,
    n: int,
    stream_factory: StreamFactory = open_stream,
) -> VotingRate:
    """Fraction of the first n filtered candidates that f1 labels as `truth`."""
    if n < 1:
        raise ValueError("n must be at least 1")
    truth_index = config.label_names.index(truth) if isinstance(truth, str) else truth

    stream = stream_factory(split_sentences(x_adv), config.perturb, deps)
    correct = 0
    total = 0
    for y in stream:
        check = detect(y, config.detector)
        if check.adversarial:
            continue
        total += 1
        if check.labels[0] == truth_index:
            correct += 1
        if total == n:
            break

    if total < n:
        logger.debug(f"Stream ended after {total} of {n} filtered candidates")
    return VotingRate(
        rate=correct / total if total else 0.0,
        correct=correct,
        total=total,
        exhausted=total < n,
    )
