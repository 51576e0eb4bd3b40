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

import argparse
import json
import logging
import sys
from typing import List, Optional

from PySide6.QtCore import QCoreApplication

from classifier import TrainConfig
from constants import (
    APP_NAME,
    DEFAULT_SIMULATION_MAX_SAMPLES,
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_TRANSPORT_ERROR,
    TRAIN_TEST_SPLIT,
)
from errors import ConfigError, DataError, TransportError
from logger_config import log_run_settings, logger, set_console_level
from main import cmd_calibrate, cmd_detect, cmd_repair, cmd_simulate, cmd_train
from run_settings import load_run_config

QCoreApplication.setOrganizationName(APP_NAME)
QCoreApplication.setApplicationName(APP_NAME)

# Flags that map one-to-one onto RunConfig keys
_RUN_KEYS = (
    "epsilon",
    "calibration",
    "alpha",
    "beta",
    "rho",
    "sigma",
    "budget",
    "method",
    "g",
    "L",
    "languages",
    "source_language",
    "seed",
    "voting",
    "fsst_samples",
    "translator_url",
    "classifier_url",
    "labels",
    "models",
    "embeddings",
    "out",
    "workers",
    "timeout",
    "retries",
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI file with run settings; flags override it")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--verbose", action="store_true", help="debug logging on the console")


def _add_models(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--models", help="comma separated model files or classifier URLs")
    parser.add_argument("--embeddings", help="embedding file for built-in models")
    parser.add_argument("--labels", help="comma separated label names for remote models")
    parser.add_argument("--classifier-url", dest="classifier_url")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--timeout", type=float)
    parser.add_argument("--retries", type=int)


def _add_threshold(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--calibration", help="calibration report to take epsilon from")


def _add_sprt(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--sigma", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="Detect adversarial texts by differential testing and repair them by voting.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a built-in classifier")
    _add_common(train)
    train.add_argument("--dataset", required=True, help='JSONL {"text", "label"}')
    train.add_argument("--embeddings", required=True)
    train.add_argument("--labels", help="comma separated label order (default: sorted)")
    train.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    train.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    train.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    train.add_argument("--l2", type=float, default=TrainConfig.l2)
    train.add_argument("--init-scale", type=float, default=TrainConfig.init_scale)
    train.add_argument("--test-size", type=float, default=TRAIN_TEST_SPLIT)

    calibrate = commands.add_parser("calibrate", help="choose the detection threshold")
    _add_common(calibrate)
    _add_models(calibrate)
    calibrate.add_argument("--dataset", required=True)

    detect = commands.add_parser("detect", help="flag adversarial texts")
    _add_common(detect)
    _add_models(detect)
    _add_threshold(detect)
    detect.add_argument("--input", required=True)

    repair = commands.add_parser("repair", help="detect and repair adversarial texts")
    _add_common(repair)
    _add_models(repair)
    _add_threshold(repair)
    _add_sprt(repair)
    repair.add_argument("--input", required=True)
    repair.add_argument("--budget", type=int)
    repair.add_argument("--method", choices=["rp", "subw", "parap"])
    repair.add_argument("--g", type=int)
    repair.add_argument("--L", type=int)
    repair.add_argument("--languages", help="comma separated target languages for parap")
    repair.add_argument("--source-language", dest="source_language")
    repair.add_argument("--translator-url", dest="translator_url")
    repair.add_argument("--voting", choices=["sprt", "fsst"])
    repair.add_argument("--fsst-samples", dest="fsst_samples", type=int)
    repair.add_argument("--trace", action="store_true", help="write the per-label test trace")
    repair.add_argument(
        "--no-timing", dest="no_timing", action="store_true", help="write timing fields as null"
    )

    simulate = commands.add_parser("simulate", help="Monte-Carlo check of the sequential test")
    _add_common(simulate)
    _add_sprt(simulate)
    simulate.add_argument("--q", type=float, required=True, help="true label frequency")
    simulate.add_argument("--trials", type=int, default=5000)
    simulate.add_argument("--max-samples", type=int, default=DEFAULT_SIMULATION_MAX_SAMPLES)

    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {key: getattr(args, key) for key in _RUN_KEYS if hasattr(args, key)}


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_console_level(logging.DEBUG)

    try:
        if args.command == "train":
            log_run_settings("train", {k: v for k, v in vars(args).items() if k not in ("command", "verbose")})
            result = cmd_train(
                args.dataset,
                args.embeddings,
                args.out or "model.json",
                TrainConfig(
                    epochs=args.epochs,
                    learning_rate=args.learning_rate,
                    seed=args.seed if args.seed is not None else 0,
                    batch_size=args.batch_size,
                    l2=args.l2,
                    init_scale=args.init_scale,
                ),
                labels=[label.strip() for label in (args.labels or "").split(",") if label.strip()],
                test_size=args.test_size,
            )
            print(json.dumps(result.summary))
            return result.exit_code

        config = load_run_config(args.config, _overrides(args))
        log_run_settings(args.command, config.to_dict())
        if args.command == "calibrate":
            result = cmd_calibrate(config, args.dataset)
        elif args.command == "detect":
            result = cmd_detect(config, args.input)
        elif args.command == "repair":
            result = cmd_repair(config, args.input, timing=not args.no_timing, trace=args.trace)
        else:
            result = cmd_simulate(config, args.q, args.trials, args.max_samples)

        if args.command in ("detect", "repair"):
            # The report owns stdout unless it went to a file
            print(json.dumps(result.summary), file=sys.stdout if config.out else sys.stderr)
        return result.exit_code
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR
    except TransportError as e:
        logger.error(f"Backend failure: {e}")
        return EXIT_TRANSPORT_ERROR
    except (DataError, OSError) as e:
        logger.error(f"Could not read input: {e}")
        return EXIT_IO_ERROR
    except ValueError as e:
        # Library preconditions (e.g. a calibration set with a single class)
        logger.error(f"Invalid input: {e}")
        return EXIT_IO_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
