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
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
from scipy.special import rel_entr

from classifier import ClassifierHandle, ProbVector, label_of
from constants import (
    DEFAULT_CALIBRATION_RANGE,
    DEFAULT_CALIBRATION_TOL,
    MAX_CALIBRATION_ITERATIONS,
    PROB_FLOOR,
)
from errors import ConfigError
from logger_config import logger

T = TypeVar("T")

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def kl_divergence(
    p: Union[ProbVector, Sequence[float]], q: Union[ProbVector, Sequence[float]]
) -> float:
    """D_KL(p || q) = sum p_i ln(p_i / q_i), with 0 ln(0/q) = 0.

    The first argument is the reference distribution (f1's output).
    """
    p_arr = p.as_array() if isinstance(p, ProbVector) else np.asarray(p, dtype=np.float64)
    q_arr = q.as_array() if isinstance(q, ProbVector) else np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape:
        raise ValueError(f"dimension mismatch: {p_arr.shape} vs {q_arr.shape}")
    q_arr = np.clip(q_arr, PROB_FLOOR, 1.0)
    # Rounding can leave a near-identical pair a hair below zero
    return max(0.0, float(np.sum(rel_entr(p_arr, q_arr))))


@dataclass(frozen=True)
class DetectorConfig:
    epsilon: float
    models: Tuple[ClassifierHandle, ...]

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if not math.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError(f"epsilon must be a finite non-negative number, got {self.epsilon}")
        if len(self.models) < 2:
            raise ConfigError("detection needs at least 2 models")
        names = self.models[0].label_names
        for model in self.models[1:]:
            if model.label_names != names:
                raise ConfigError(
                    f"models '{self.models[0].id}' and '{model.id}' disagree on label names: "
                    f"{list(names)} vs {list(model.label_names)}"
                )

    @property
    def label_names(self) -> Tuple[str, ...]:
        return self.models[0].label_names


@dataclass(frozen=True)
class DetectionVerdict:
    adversarial: bool
    # Max over model pairs when more than two models are configured
    d_kl: float
    labels: Tuple[int, ...]

    @property
    def labels_agree(self) -> bool:
        return len(set(self.labels)) == 1


def max_pairwise_kl(probs: Sequence[ProbVector]) -> float:
    return max(kl_divergence(p, q) for p, q in combinations(probs, 2))


def verdict_from_probs(probs: Sequence[ProbVector], epsilon: float) -> DetectionVerdict:
    """Normal iff every model gives the same label and every pairwise D_KL < epsilon."""
    if len(probs) < 2:
        raise ValueError("need the outputs of at least 2 models")
    labels = tuple(label_of(p) for p in probs)
    d_kl = max_pairwise_kl(probs)
    adversarial = len(set(labels)) > 1 or d_kl >= epsilon
    return DetectionVerdict(adversarial=adversarial, d_kl=d_kl, labels=labels)


def _model_outputs(x: str, config: DetectorConfig) -> List[ProbVector]:
    return [model.classify(x) for model in config.models]


def is_adversarial(x: str, config: DetectorConfig) -> DetectionVerdict:
    if len(config.models) != 2:
        raise ConfigError(f"is_adversarial expects 2 models, got {len(config.models)}")
    return verdict_from_probs(_model_outputs(x, config), config.epsilon)


def is_adversarial_multi(x: str, config: DetectorConfig) -> DetectionVerdict:
    """Adversarial if any pair of models disagrees on the label or has D_KL >= epsilon."""
    if len(config.models) < 3:
        raise ConfigError(
            f"is_adversarial_multi expects 3 or more models, got {len(config.models)}"
        )
    return verdict_from_probs(_model_outputs(x, config), config.epsilon)


def detect(x: str, config: DetectorConfig) -> DetectionVerdict:
    if len(config.models) == 2:
        return is_adversarial(x, config)
    return is_adversarial_multi(x, config)


def baseline_is_adversarial(x: str, config: DetectorConfig) -> DetectionVerdict:
    """Plain differential testing: flags x iff the models' labels disagree."""
    probs = _model_outputs(x, config)
    labels = tuple(label_of(p) for p in probs)
    return DetectionVerdict(
        adversarial=len(set(labels)) > 1, d_kl=max_pairwise_kl(probs), labels=labels
    )


# ---------------- Threshold calibration ----------------


@dataclass(frozen=True)
class CalibrationResult:
    epsilon: float
    accuracy: float
    iterations: int

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "accuracy": self.accuracy, "iterations": self.iterations}


def _step_correct_counter(
    scored: Sequence[Tuple[float, bool]],
) -> Callable[[float], int]:
    """Returns eps -> number of items the rule (d_kl >= eps => adversarial) gets right."""
    ordered = np.sort(np.asarray([d for d, truth in scored if truth], dtype=np.float64))
    normals = np.sort(np.asarray([d for d, truth in scored if not truth], dtype=np.float64))

    def count(eps: float) -> int:
        flagged_adv = len(ordered) - int(np.searchsorted(ordered, eps, side="left"))
        passed_normal = int(np.searchsorted(normals, eps, side="left"))
        return flagged_adv + passed_normal

    return count


def _golden_section_max(
    objective: Callable[[float], float], lo: float, hi: float, tol: float
) -> Tuple[float, int]:
    a, b = lo, hi
    iterations = 0
    m1 = b - _INV_PHI * (b - a)
    m2 = a + _INV_PHI * (b - a)
    f1 = objective(m1)
    f2 = objective(m2)
    while b - a >= tol and iterations < MAX_CALIBRATION_ITERATIONS:
        if f2 < f1:
            b, m2, f2 = m2, m1, f1
            m1 = b - _INV_PHI * (b - a)
            f1 = objective(m1)
        else:
            a, m1, f1 = m1, m2, f2
            m2 = a + _INV_PHI * (b - a)
            f2 = objective(m2)
        iterations += 1
    return (a + b) / 2.0, iterations


def calibrate_epsilon(
    scored: Sequence[Tuple[float, bool]],
    search_range: Tuple[float, float] = DEFAULT_CALIBRATION_RANGE,
    tol: float = DEFAULT_CALIBRATION_TOL,
    objective: Optional[Callable[[float], float]] = None,
) -> CalibrationResult:
    """
    Chooses epsilon by golden-section search on classification accuracy.

    Args:
        scored: (d_kl, is_adversarial_truth) pairs.
        search_range: Initial [lo, hi] bracket for epsilon.
        tol: Stop once the bracket is narrower than this.
        objective: Replaces the accuracy objective (used to test the search
            itself); when given, scored may be empty and no plateau sweep runs.

    Returns:
        CalibrationResult: epsilon, its accuracy (or objective value) and the
        number of search iterations.

    The accuracy objective is a step function, so after the search converges
    every plateau between consecutive observed scores is checked once; if some
    plateau beats the converged point, the smallest such epsilon wins.
    """
    lo, hi = search_range
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ValueError(f"degenerate calibration range [{lo}, {hi}]")
    if tol <= 0:
        raise ValueError("tol must be positive")

    if objective is not None:
        if hi - lo < tol:
            eps = (lo + hi) / 2.0
            return CalibrationResult(epsilon=eps, accuracy=float(objective(eps)), iterations=0)
        eps, iterations = _golden_section_max(objective, lo, hi, tol)
        return CalibrationResult(
            epsilon=eps, accuracy=float(objective(eps)), iterations=iterations
        )

    if not scored:
        raise ValueError("calibration needs at least one scored item")
    truths = {bool(truth) for _, truth in scored}
    if truths != {True, False}:
        raise ValueError("calibration needs both adversarial and normal items")

    n = len(scored)
    correct = _step_correct_counter(scored)

    if hi - lo < tol:
        eps = (lo + hi) / 2.0
        return CalibrationResult(epsilon=eps, accuracy=correct(eps) / n, iterations=0)

    eps, iterations = _golden_section_max(lambda e: correct(e) / n, lo, hi, tol)
    converged = correct(eps)

    breakpoints = sorted({lo, hi} | {float(d) for d, _ in scored if lo < d <= hi})
    midpoints = [(left + right) / 2.0 for left, right in zip(breakpoints, breakpoints[1:])]
    best_count = converged
    best_eps = eps
    for mid in [lo] + midpoints:
        count = correct(mid)
        if count > best_count:
            best_count = count
            best_eps = mid
    if best_eps != eps:
        logger.debug(
            f"Golden-section point {eps:.6f} ({converged}/{n}) improved by plateau sweep to "
            f"{best_eps:.6f} ({best_count}/{n})"
        )

    logger.info(
        f"Calibrated epsilon={best_eps:.6f} with accuracy {best_count}/{n} after {iterations} iterations"
    )
    return CalibrationResult(epsilon=best_eps, accuracy=best_count / n, iterations=iterations)


def balance_calibration_set(
    records: Sequence[T],
    rng: np.random.Generator,
    truth: Callable[[T], bool] = lambda record: bool(record[1]),
) -> List[T]:
    """Keeps every minority-class record plus an equally sized seeded sample of the majority.

    Input order is preserved. Raises ValueError if either class is missing.
    """
    positives = [i for i, record in enumerate(records) if truth(record)]
    negatives = [i for i, record in enumerate(records) if not truth(record)]
    if not positives or not negatives:
        raise ValueError(
            f"cannot balance a calibration set with {len(positives)} adversarial and "
            f"{len(negatives)} normal items"
        )
    minority, majority = sorted((positives, negatives), key=len)
    sampled = rng.choice(len(majority), size=len(minority), replace=False)
    keep = set(minority) | {majority[int(i)] for i in sampled}
    return [record for i, record in enumerate(records) if i in keep]


# ---------------- Metrics ----------------


@dataclass(frozen=True)
class DetectionMetrics:
    detection_rate: float
    false_positive_rate: float
    tp: int
    tn: int
    fp: int
    fn: int
    # Set when the corresponding denominator was zero (the rate is then 0)
    detection_rate_undefined: bool = False
    false_positive_rate_undefined: bool = False

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {
            "detection_rate": self.detection_rate,
            "false_positive_rate": self.false_positive_rate,
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "detection_rate_undefined": self.detection_rate_undefined,
            "false_positive_rate_undefined": self.false_positive_rate_undefined,
        }


def detection_metrics(
    verdicts: Sequence[Tuple[Union[DetectionVerdict, bool], bool]],
) -> DetectionMetrics:
    """Detection rate = tp / (tp + fn); false positive rate = fp / (tp + fp)."""
    if not verdicts:
        raise ValueError("detection metrics need at least one verdict")

    tp = tn = fp = fn = 0
    for verdict, truth in verdicts:
        flagged = verdict.adversarial if isinstance(verdict, DetectionVerdict) else bool(verdict)
        if flagged and truth:
            tp += 1
        elif flagged:
            fp += 1
        elif truth:
            fn += 1
        else:
            tn += 1

    return DetectionMetrics(
        detection_rate=tp / (tp + fn) if tp + fn else 0.0,
        false_positive_rate=fp / (tp + fp) if tp + fp else 0.0,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        detection_rate_undefined=tp + fn == 0,
        false_positive_rate_undefined=tp + fp == 0,
    )
