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

import contextlib
import json
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from sklearn.model_selection import train_test_split

from batch_worker import BatchResult, run_ordered
from classifier import (
    ClassifierHandle,
    TrainConfig,
    accuracy,
    label_of,
    load_model,
    save_model,
    train_builtin,
)
from constants import (
    DEFAULT_SIMULATION_MAX_SAMPLES,
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_OK,
    EXIT_TRANSPORT_ERROR,
    MIN_CONFIDENT_CALIBRATION_SIZE,
    TRAIN_TEST_SPLIT,
)
from dataset_loader import (
    JsonlRecord,
    load_labeled_dataset,
    load_scored_records,
    read_jsonl_records,
    require_text,
)
from detector import (
    DetectorConfig,
    balance_calibration_set,
    baseline_is_adversarial,
    calibrate_epsilon,
    detect,
    detection_metrics,
    max_pairwise_kl,
)
from embedding import EmbeddingStore, load_embeddings_file
from errors import ConfigError, DataError, RepairAborted, TransportError
from logger_config import logger
from perturb import PerturbDeps, PerturbMethod
from repair import NotAdversarial, RepairConfig, RepairOutcome, Repaired, repair
from run_settings import RunConfig
from services import CachedTranslator, RemoteClassifierClient, TranslationClient, Translator
from utils import derive_rng, dump_json_line, to_ms
from voting import simulate_sprt


@dataclass
class ReportRecord:
    """One line of a detect or repair report."""

    id: Any
    verdict: Optional[bool] = None
    d_kl: Optional[float] = None
    label_before: Optional[str] = None
    label_after: Optional[str] = None
    repaired_text: Optional[str] = None
    candidates_generated: int = 0
    candidates_filtered: int = 0
    decision: Optional[str] = None
    wall_time_ms: Optional[float] = None
    detect_time_ms: Optional[float] = None
    repair_time_ms: Optional[float] = None
    translation_calls: int = 0
    provider_latency_ms: Optional[float] = None
    labels_rejected: List[str] = field(default_factory=list)
    baseline_verdict: Optional[bool] = None
    truth_label: Optional[str] = None
    truth_adversarial: Optional[bool] = None
    error: Optional[str] = None
    error_kind: Optional[str] = None
    trace: Optional[List[dict]] = None
    vote_label: Optional[str] = None
    vote_interval: Optional[List[float]] = None

    def to_dict(self, timing: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "id": self.id,
            "verdict": self.verdict,
            "d_kl": self.d_kl,
            "label_before": self.label_before,
            "label_after": self.label_after,
            "repaired_text": self.repaired_text,
            "candidates_generated": self.candidates_generated,
            "candidates_filtered": self.candidates_filtered,
            "decision": self.decision,
            "wall_time_ms": self.wall_time_ms if timing else None,
            "detect_time_ms": self.detect_time_ms if timing else None,
            "repair_time_ms": self.repair_time_ms if timing else None,
            "translation_calls": self.translation_calls,
            "provider_latency_ms": self.provider_latency_ms if timing else None,
            "labels_rejected": list(self.labels_rejected),
            "baseline_verdict": self.baseline_verdict,
            "truth_label": self.truth_label,
            "truth_adversarial": self.truth_adversarial,
        }
        if self.error is not None:
            data["error"] = self.error
            data["error_kind"] = self.error_kind
        if self.trace is not None:
            data["trace"] = self.trace
        if self.vote_interval is not None:
            data["vote_label"] = self.vote_label
            data["vote_interval"] = self.vote_interval
        return data


@dataclass
class CommandResult:
    exit_code: int
    summary: Dict[str, Any]
    records: List[ReportRecord] = field(default_factory=list)


@dataclass
class Backends:
    models: List[ClassifierHandle]
    store: Optional[EmbeddingStore] = None
    translator: Optional[Translator] = None

    @property
    def label_names(self):
        return self.models[0].label_names


def _is_url(ref: str) -> bool:
    return ref.startswith(("http://", "https://"))


def load_backends(config: RunConfig, need_models: bool = True) -> Backends:
    """
    Builds the model handles, embedding store and translator a run needs.

    Entries of `models` are built-in model files or remote classifier URLs;
    `classifier_url` appends one more remote model. Remote models take their
    label names from `labels`, or from the first built-in model.
    """
    store = load_embeddings_file(config.embeddings) if config.embeddings else None

    refs = list(config.models)
    if config.classifier_url:
        refs.append(config.classifier_url)

    built: Dict[int, ClassifierHandle] = {}
    for i, ref in enumerate(refs):
        if _is_url(ref):
            continue
        if store is None:
            raise ConfigError(f"built-in model '{ref}' needs --embeddings")
        built[i] = ClassifierHandle.builtin(f"f{i + 1}", load_model(ref), store)

    label_names = tuple(config.labels)
    if not label_names and built:
        label_names = built[min(built)].label_names

    models: List[ClassifierHandle] = []
    for i, ref in enumerate(refs):
        if i in built:
            models.append(built[i])
            continue
        if not label_names:
            raise ConfigError(f"remote model '{ref}' needs --labels")
        client = RemoteClassifierClient(
            ref, label_names, timeout=config.timeout, retries=config.retries
        )
        models.append(ClassifierHandle.remote(f"f{i + 1}", client, label_names))

    if need_models and len(models) < 2:
        raise ConfigError(f"at least 2 models are required, got {len(models)}")

    translator = None
    if config.translator_url:
        translator = TranslationClient(
            config.translator_url, timeout=config.timeout, retries=config.retries
        )
    return Backends(models=models, store=store, translator=translator)


@contextlib.contextmanager
def _open_output(path: Optional[str]) -> Iterator[TextIO]:
    if not path:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yield f


def _exit_code_for(error: BaseException) -> int:
    if isinstance(error, (TransportError, RepairAborted)):
        return EXIT_TRANSPORT_ERROR
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    return EXIT_IO_ERROR


def _error_kind(error: BaseException) -> str:
    return {
        EXIT_TRANSPORT_ERROR: "transport",
        EXIT_CONFIG_ERROR: "config",
        EXIT_IO_ERROR: "data",
    }[_exit_code_for(error)]


def _record_id(record: JsonlRecord) -> Any:
    if record.data is not None and "id" in record.data:
        return record.data["id"]
    return record.line_number


def _truth_fields(record: JsonlRecord) -> Dict[str, Any]:
    data = record.data or {}
    label = data.get("label")
    adversarial = data.get("adversarial")
    return {
        "truth_label": label if isinstance(label, str) else None,
        "truth_adversarial": adversarial if isinstance(adversarial, bool) else None,
    }


def _collect(
    records: Sequence[JsonlRecord], results: Sequence[BatchResult]
) -> Tuple[List[ReportRecord], int]:
    reports: List[ReportRecord] = []
    exit_code = EXIT_OK
    for record, result in zip(records, results):
        if result.ok:
            reports.append(result.value)
            continue
        error = result.error
        stats = error.stats if isinstance(error, RepairAborted) else None
        report = ReportRecord(id=_record_id(record), error=str(error), error_kind=_error_kind(error))
        if stats is not None:
            report.candidates_generated = stats.candidates_generated
            report.candidates_filtered = stats.candidates_filtered
        reports.append(report)
        exit_code = max(exit_code, _exit_code_for(error))
    return reports, exit_code


def _write_records(path: Optional[str], reports: Sequence[ReportRecord], timing: bool) -> None:
    with _open_output(path) as out:
        for report in reports:
            out.write(dump_json_line(report.to_dict(timing=timing)))
            out.write("\n")


# ---------------- train ----------------


def cmd_train(
    dataset_path: str,
    embeddings_path: str,
    out_path: str,
    train_config: TrainConfig = TrainConfig(),
    labels: Sequence[str] = (),
    test_size: float = TRAIN_TEST_SPLIT,
) -> CommandResult:
    dataset = load_labeled_dataset(dataset_path)
    if not dataset:
        raise DataError(f"dataset '{dataset_path}' holds no records")
    store = load_embeddings_file(embeddings_path)

    if len(dataset) >= 5:
        train_set, test_set = train_test_split(
            dataset, test_size=test_size, random_state=train_config.seed
        )
    else:
        logger.warning(f"Only {len(dataset)} record(s), training and testing on all of them")
        train_set, test_set = list(dataset), list(dataset)

    model = train_builtin(
        train_set,
        store,
        config=train_config,
        label_names=tuple(labels) or tuple(sorted({label for _, label in dataset})),
        embedding_ref=embeddings_path,
    )
    save_model(model, out_path)

    handle = ClassifierHandle.builtin("trained", model, store)
    summary = {
        "model": out_path,
        "train_size": len(train_set),
        "test_size": len(test_set),
        "train_accuracy": accuracy(handle, train_set),
        "test_accuracy": accuracy(handle, test_set),
    }
    logger.info(
        f"Train accuracy {summary['train_accuracy']:.4f}, test accuracy {summary['test_accuracy']:.4f}"
    )
    return CommandResult(exit_code=EXIT_OK, summary=summary)


# ---------------- calibrate ----------------


def _score_texts(
    dataset: Sequence[dict], models: Sequence[ClassifierHandle]
) -> List[float]:
    texts = [item["text"] for item in dataset]
    outputs = [model.classify_batch(texts) for model in models]
    return [max_pairwise_kl([out[i] for out in outputs]) for i in range(len(texts))]


def cmd_calibrate(config: RunConfig, dataset_path: str, backends: Optional[Backends] = None) -> CommandResult:
    """
    Picks epsilon on a balanced set of adversarial and normal items.

    The dataset is either pre-scored ({"d_kl", "adversarial"} lines) or labeled
    text. For text, an item counts as adversarial when its "adversarial" field
    says so, otherwise when the first model misclassifies it.
    """
    rng = np.random.default_rng(config.seed)
    records = [r for r in read_jsonl_records(dataset_path)]
    bad = next((r for r in records if not r.ok), None)
    if bad is not None:
        raise DataError(bad.error, bad.line_number)
    if not records:
        raise DataError(f"calibration dataset '{dataset_path}' holds no records")

    if "d_kl" in records[0].data:
        scored = balance_calibration_set(load_scored_records(dataset_path), rng)
    else:
        backends = backends or load_backends(config)
        first = backends.models[0]
        items = []
        for record in records:
            text = require_text(record)
            data = record.data
            if isinstance(data.get("adversarial"), bool):
                truth = data["adversarial"]
            else:
                label = data.get("label")
                if not isinstance(label, str):
                    raise DataError('needs "label" or "adversarial"', record.line_number)
                truth = first.label_names[label_of(first.classify(text))] != label
            items.append({"text": text, "adversarial": truth})

        if not any(item["adversarial"] for item in items):
            raise DataError(
                "no misclassified samples to calibrate on; try a larger dataset"
            )
        balanced = balance_calibration_set(items, rng, truth=lambda item: item["adversarial"])
        scores = _score_texts(balanced, backends.models)
        scored = [(d, item["adversarial"]) for d, item in zip(scores, balanced)]

    result = calibrate_epsilon(scored)
    summary = {
        **result.to_dict(),
        "balanced_size": len(scored),
        "adversarial": sum(1 for _, truth in scored if truth),
        "normal": sum(1 for _, truth in scored if not truth),
        "low_confidence": len(scored) < MIN_CONFIDENT_CALIBRATION_SIZE,
    }
    if summary["low_confidence"]:
        logger.warning(
            f"Calibrated on only {len(scored)} items, the threshold is low confidence"
        )
    with _open_output(config.out) as out:
        json.dump(summary, out)
        out.write("\n")
    return CommandResult(exit_code=EXIT_OK, summary=summary)


# ---------------- detect ----------------


def cmd_detect(
    config: RunConfig,
    input_path: str,
    backends: Optional[Backends] = None,
    show_progress: bool = True,
) -> CommandResult:
    epsilon = config.resolve_epsilon()
    backends = backends or load_backends(config)
    detector = DetectorConfig(epsilon=epsilon, models=backends.models)
    names = detector.label_names
    records = list(read_jsonl_records(input_path))

    def detect_one(index: int, record: JsonlRecord) -> ReportRecord:
        text = require_text(record)
        verdict = detect(text, detector)
        baseline = baseline_is_adversarial(text, detector)
        return ReportRecord(
            id=_record_id(record),
            verdict=verdict.adversarial,
            d_kl=verdict.d_kl,
            label_before=names[verdict.labels[0]],
            decision=None if verdict.adversarial else "not_adversarial",
            baseline_verdict=baseline.adversarial,
            **_truth_fields(record),
        )

    results = run_ordered(records, detect_one, config.workers, "detect", show_progress)
    reports, exit_code = _collect(records, results)
    _write_records(config.out, reports, timing=True)

    summary: Dict[str, Any] = {
        "records": len(reports),
        "errors": sum(1 for r in reports if r.error is not None),
        "flagged": sum(1 for r in reports if r.verdict),
    }
    with_truth = [r for r in reports if r.error is None and r.truth_adversarial is not None]
    if with_truth:
        kl_d = detection_metrics([(r.verdict, r.truth_adversarial) for r in with_truth])
        baseline = detection_metrics([(r.baseline_verdict, r.truth_adversarial) for r in with_truth])
        summary["kl_d"] = kl_d.to_dict()
        summary["baseline"] = baseline.to_dict()
        logger.info(
            f"KL-D detection rate {kl_d.detection_rate:.4f}, false positive rate "
            f"{kl_d.false_positive_rate:.4f}; baseline detection rate {baseline.detection_rate:.4f}"
        )
    return CommandResult(exit_code=exit_code, summary=summary, records=reports)


# ---------------- repair ----------------


def repair_accuracy(records: Sequence[ReportRecord]) -> Optional[float]:
    """#correctly repaired / #adversarial, over flagged records that carry a truth label."""
    relevant = [
        r for r in records if r.error is None and r.verdict and r.truth_label is not None
    ]
    if not relevant:
        return None
    correct = sum(
        1 for r in relevant if r.decision == Repaired.decision and r.label_after == r.truth_label
    )
    return correct / len(relevant)


def build_repair_config(config: RunConfig, backends: Backends, trace: bool = False) -> RepairConfig:
    perturb = config.perturb_config()
    if perturb.method is PerturbMethod.PARAP and backends.translator is None:
        raise ConfigError("method parap needs --translator-url")
    if perturb.method is not PerturbMethod.PARAP and backends.store is None:
        raise ConfigError(f"method {perturb.method.value} needs --embeddings")
    return RepairConfig(
        detector=DetectorConfig(epsilon=config.resolve_epsilon(), models=backends.models),
        perturb=perturb,
        sprt=config.sprt_params(),
        voting=config.voting_strategy(),
        fsst_samples=config.fsst_samples,
        trace=trace,
    )


def _outcome_record(record: JsonlRecord, outcome: RepairOutcome, names, trace: bool) -> ReportRecord:
    stats = outcome.stats
    label_before = names[outcome.verdict.labels[0]]
    if isinstance(outcome, Repaired):
        label_after, repaired_text = outcome.label_name, outcome.text
    elif isinstance(outcome, NotAdversarial):
        label_after, repaired_text = label_before, None
    else:
        label_after, repaired_text = None, None
    return ReportRecord(
        id=_record_id(record),
        verdict=outcome.verdict.adversarial,
        d_kl=outcome.verdict.d_kl,
        label_before=label_before,
        label_after=label_after,
        repaired_text=repaired_text,
        candidates_generated=stats.candidates_generated,
        candidates_filtered=stats.candidates_filtered,
        decision=outcome.decision,
        wall_time_ms=to_ms(stats.wall_time),
        detect_time_ms=to_ms(stats.detect_time),
        repair_time_ms=to_ms(stats.repair_time),
        translation_calls=stats.translation_calls,
        provider_latency_ms=to_ms(stats.provider_latency),
        labels_rejected=list(stats.labels_rejected),
        trace=[entry.to_dict() for entry in stats.trace] if trace else None,
        vote_label=stats.vote_label,
        vote_interval=list(stats.vote_interval) if stats.vote_interval is not None else None,
        **_truth_fields(record),
    )


def cmd_repair(
    config: RunConfig,
    input_path: str,
    backends: Optional[Backends] = None,
    timing: bool = True,
    trace: bool = False,
    show_progress: bool = True,
) -> CommandResult:
    backends = backends or load_backends(config)
    repair_config = build_repair_config(config, backends, trace=trace)
    names = repair_config.label_names
    records = list(read_jsonl_records(input_path))

    def repair_one(index: int, record: JsonlRecord) -> ReportRecord:
        text = require_text(record)
        deps = PerturbDeps(
            store=backends.store,
            f1=backends.models[0],
            f2=backends.models[1],
            translator=CachedTranslator(backends.translator) if backends.translator else None,
            rng=derive_rng(config.seed, index),
        )
        outcome = repair(text, repair_config, deps)
        return _outcome_record(record, outcome, names, trace)

    results = run_ordered(records, repair_one, config.workers, "repair", show_progress)
    reports, exit_code = _collect(records, results)
    _write_records(config.out, reports, timing=timing)

    summary: Dict[str, Any] = {
        "records": len(reports),
        "errors": sum(1 for r in reports if r.error is not None),
    }
    for decision in ("not_adversarial", "accepted", "budget_exhausted"):
        summary[decision] = sum(1 for r in reports if r.decision == decision)
    overall = repair_accuracy(reports)
    if overall is not None:
        summary["repair_accuracy"] = overall
        logger.info(f"Overall repair accuracy {overall:.4f}")
    return CommandResult(exit_code=exit_code, summary=summary, records=reports)


# ---------------- simulate ----------------


def cmd_simulate(
    config: RunConfig,
    q: float,
    trials: int,
    max_samples: int = DEFAULT_SIMULATION_MAX_SAMPLES,
) -> CommandResult:
    params = config.sprt_params()
    report = simulate_sprt(params, q, trials, max_samples, np.random.default_rng(config.seed))
    summary = {
        "alpha": params.alpha,
        "beta": params.beta,
        "rho": params.rho,
        "sigma": params.sigma,
        "p0": params.p0,
        "p1": params.p1,
        **report.to_dict(),
    }
    with _open_output(config.out) as out:
        json.dump(summary, out)
        out.write("\n")
    return CommandResult(exit_code=EXIT_OK, summary=summary)
