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
Label voting over perturbed candidates.

For every candidate label c the sequential test decides between
H0: P(f(x) = c) >= p0 and H1: P(f(x) = c) <= p1, with p0 = rho + sigma and
p1 = rho - sigma. All ratios are kept as natural logarithms; the acceptance
and rejection bounds are ln(beta / (1 - alpha)) and ln((1 - beta) / alpha).
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from constants import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_RHO, DEFAULT_SIGMA
from errors import ConfigError
from logger_config import logger

_SIMULATION_CHUNK = 256


@dataclass(frozen=True)
class SprtParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    rho: float = DEFAULT_RHO
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ConfigError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if not (0.0 < self.beta < 0.5):
            raise ConfigError(f"beta must be in (0, 0.5), got {self.beta}")
        if not (0.5 < self.rho < 1.0):
            raise ConfigError(f"rho must be in (0.5, 1), got {self.rho}")
        if not (0.0 < self.sigma < min(self.rho, 1.0 - self.rho)):
            raise ConfigError(
                f"sigma must be in (0, {min(self.rho, 1.0 - self.rho):g}) for rho={self.rho}, "
                f"got {self.sigma}"
            )

    @property
    def p0(self) -> float:
        return self.rho + self.sigma

    @property
    def p1(self) -> float:
        return self.rho - self.sigma

    @property
    def log_accept_bound(self) -> float:
        return math.log(self.beta / (1.0 - self.alpha))

    @property
    def log_reject_bound(self) -> float:
        return math.log((1.0 - self.beta) / self.alpha)

    @property
    def hit_weight(self) -> float:
        """Log-ratio contribution of one candidate carrying the tested label."""
        return math.log(self.p1 / self.p0)

    @property
    def miss_weight(self) -> float:
        return math.log((1.0 - self.p1) / (1.0 - self.p0))


class SprtOutcome(str, Enum):
    ACCEPT_H0 = "accept"
    REJECT_H0 = "reject"
    INCONCLUSIVE = "inconclusive"

    @property
    def is_terminal(self) -> bool:
        return self is not SprtOutcome.INCONCLUSIVE


@dataclass
class SprtState:
    """Running counts over the filtered candidates seen so far."""

    k: int = 0
    z: Dict[int, int] = field(default_factory=dict)

    def observe(self, label: int) -> None:
        self.k += 1
        self.z[label] = self.z.get(label, 0) + 1

    def count(self, label: int) -> int:
        return self.z.get(label, 0)


def sprt_log_ratio(z: int, k: int, params: SprtParams) -> float:
    if not (0 <= z <= k):
        raise ValueError(f"need 0 <= z <= k, got z={z}, k={k}")
    return z * params.hit_weight + (k - z) * params.miss_weight


def decision_bounds(params: SprtParams) -> Tuple[float, float]:
    return params.log_accept_bound, params.log_reject_bound


def hyp_test(label: int, state: SprtState, params: SprtParams) -> SprtOutcome:
    ratio = sprt_log_ratio(state.count(label), state.k, params)
    if ratio <= params.log_accept_bound:
        return SprtOutcome.ACCEPT_H0
    if ratio >= params.log_reject_bound:
        return SprtOutcome.REJECT_H0
    return SprtOutcome.INCONCLUSIVE


# ---------------- Fixed-size sampling ----------------


def fsst_estimate(labels: Sequence[int], c: int) -> float:
    if not labels:
        raise ValueError("cannot estimate a label frequency from no observations")
    return sum(1 for label in labels if label == c) / len(labels)


def fsst_interval(labels: Sequence[int], c: int, alpha: float = 0.05) -> Tuple[float, float]:
    """Clopper-Pearson (1 - alpha) interval for the frequency of c."""
    if not labels:
        raise ValueError("cannot estimate a label frequency from no observations")
    hits = sum(1 for label in labels if label == c)
    low, high = proportion_confint(hits, len(labels), alpha=alpha, method="beta")
    return float(low), float(high)


def fsst_decide(
    labels: Sequence[int], rho: float, excluded: Iterable[int] = ()
) -> Optional[int]:
    """The label outside `excluded` whose estimated frequency reaches rho, if any.

    With rho > 0.5 at most one label can qualify.
    """
    if not labels:
        return None
    skip = set(excluded)
    counts = Counter(labels)
    for label in sorted(counts):
        if label not in skip and counts[label] / len(labels) >= rho:
            return label
    return None


# ---------------- Monte-Carlo simulation ----------------


@dataclass(frozen=True)
class SimulationReport:
    q: float
    trials: int
    max_samples: int
    accept_rate: float
    reject_rate: float
    inconclusive_rate: float
    # None when no trial reached a decision
    mean_samples_to_decision: Optional[float]

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "trials": self.trials,
            "max_samples": self.max_samples,
            "accept_rate": self.accept_rate,
            "reject_rate": self.reject_rate,
            "inconclusive_rate": self.inconclusive_rate,
            "mean_samples_to_decision": self.mean_samples_to_decision,
        }


def simulate_sprt(
    params: SprtParams,
    q: float,
    trials: int,
    max_samples: int,
    rng: np.random.Generator,
) -> SimulationReport:
    """
    Runs `trials` independent label streams through the sequential test.

    Every stream carries the tested label with probability q per candidate and
    stops at the first terminal decision or after max_samples candidates.

    Args:
        params (SprtParams): Test parameters.
        q (float): True frequency of the tested label, in [0, 1].
        trials (int): Number of simulated streams.
        max_samples (int): Cap on candidates per stream.
        rng (np.random.Generator): Source of randomness.

    Returns:
        SimulationReport: Outcome rates and mean samples to a decision.
    """
    if not (0.0 <= q <= 1.0):
        raise ConfigError(f"q must be in [0, 1], got {q}")
    if trials < 1 or max_samples < 1:
        raise ConfigError("trials and max_samples must be at least 1")

    accept, reject = decision_bounds(params)
    hit, miss = params.hit_weight, params.miss_weight

    hits_so_far = np.zeros(trials, dtype=np.int64)
    decided_at = np.zeros(trials, dtype=np.int64)
    # 0 = inconclusive, 1 = accept, 2 = reject
    outcome = np.zeros(trials, dtype=np.int8)
    active = np.arange(trials)
    k0 = 0

    while active.size and k0 < max_samples:
        width = min(_SIMULATION_CHUNK, max_samples - k0)
        draws = rng.random((active.size, width)) < q
        z = hits_so_far[active][:, None] + np.cumsum(draws, axis=1)
        k = k0 + np.arange(1, width + 1)
        ratio = z * hit + (k - z) * miss
        accepted = ratio <= accept
        done = accepted | (ratio >= reject)

        finished = done.any(axis=1)
        first = np.argmax(done, axis=1)
        rows = np.nonzero(finished)[0]
        outcome[active[rows]] = np.where(accepted[rows, first[rows]], 1, 2)
        decided_at[active[rows]] = k[first[rows]]

        hits_so_far[active] = z[:, -1]
        active = active[~finished]
        k0 += width

    decided = outcome != 0
    report = SimulationReport(
        q=q,
        trials=trials,
        max_samples=max_samples,
        accept_rate=float(np.mean(outcome == 1)),
        reject_rate=float(np.mean(outcome == 2)),
        inconclusive_rate=float(np.mean(~decided)),
        mean_samples_to_decision=float(decided_at[decided].mean()) if decided.any() else None,
    )
    logger.debug(f"SPRT simulation: {report}")
    return report
