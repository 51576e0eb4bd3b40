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

"""Attack, calibrate, detect and repair on the synthetic sentiment world."""

import numpy as np
import pytest

from classifier import accuracy, label_of
from detector import (
    DetectorConfig,
    balance_calibration_set,
    baseline_is_adversarial,
    calibrate_epsilon,
    detect,
    detection_metrics,
    max_pairwise_kl,
)
from greedy_attack import greedy_synonym_attack
from perturb import PerturbConfig, PerturbDeps
from repair import RepairConfig, Repaired, repair, voting_hypothesis_rate
from utils import derive_rng


@pytest.fixture(scope="module")
def handles(world):
    return world.handles()


@pytest.fixture(scope="module")
def adversarials(world, handles):
    """(adversarial text, true label) pairs that fool the first model."""
    f1, _ = handles
    found = []
    for text, label in world.corpus:
        if label_of(f1.classify(text)) != f1.label_names.index(label):
            continue
        adversarial = greedy_synonym_attack(text, label, f1, world.store)
        if adversarial is not None:
            found.append((adversarial, label))
    return found


@pytest.fixture(scope="module")
def detector(world, handles, adversarials):
    normals = [(text, False) for text, _ in world.corpus]
    items = [(text, True) for text, _ in adversarials] + normals
    balanced = balance_calibration_set(items, np.random.default_rng(0))
    scored = [(max_pairwise_kl([f.classify(text) for f in handles]), truth) for text, truth in balanced]
    result = calibrate_epsilon(scored)
    return DetectorConfig(epsilon=result.epsilon, models=handles)


def _repair_config(detector):
    return RepairConfig(detector=detector, perturb=PerturbConfig(method="subw", g=4, L=3, budget=650))


def test_models_are_accurate_on_clean_text(world, handles):
    for handle in handles:
        assert accuracy(handle, world.corpus) >= 0.95


def test_attack_finds_adversarial_examples(handles, adversarials):
    f1, _ = handles
    assert len(adversarials) >= 50
    for text, label in adversarials:
        assert f1.label_names[label_of(f1.classify(text))] != label


def test_kl_detection_beats_label_disagreement(world, handles, detector, adversarials):
    verdicts = [(detect(text, detector), True) for text, _ in adversarials]
    baseline = [(baseline_is_adversarial(text, detector), True) for text, _ in adversarials]
    normals = [(detect(text, detector), False) for text, _ in world.corpus[: len(adversarials)]]

    kl_rate = detection_metrics(verdicts).detection_rate
    baseline_rate = detection_metrics(baseline).detection_rate
    assert kl_rate > baseline_rate
    assert kl_rate >= 0.7

    flagged_normals = sum(1 for verdict, _ in normals if verdict.adversarial)
    assert flagged_normals <= 0.1 * len(normals)


def test_subw_repair_restores_true_labels(world, handles, detector, adversarials):
    f1, f2 = handles
    config = _repair_config(detector)
    detected = [(text, label) for text, label in adversarials if detect(text, detector).adversarial]
    assert detected

    restored = 0
    for index, (text, label) in enumerate(detected):
        deps = PerturbDeps(store=world.store, f1=f1, f2=f2, rng=derive_rng(0, index))
        outcome = repair(text, config, deps)
        if isinstance(outcome, Repaired) and outcome.label_name == label:
            restored += 1
    assert restored >= 0.7 * len(detected)


def test_most_filtered_candidates_vote_for_the_true_label(world, handles, detector, adversarials):
    f1, f2 = handles
    config = _repair_config(detector)
    majority = 0
    for index, (text, label) in enumerate(adversarials):
        deps = PerturbDeps(store=world.store, f1=f1, f2=f2, rng=derive_rng(1, index))
        rate = voting_hypothesis_rate(text, label, config, deps, n=100)
        if rate.rate > 0.5:
            majority += 1
    assert majority >= 0.8 * len(adversarials)
