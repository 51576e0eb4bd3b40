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

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

from PySide6.QtCore import QSettings

from constants import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_BUDGET,
    DEFAULT_FSST_SAMPLES,
    DEFAULT_G,
    DEFAULT_L,
    DEFAULT_METHOD,
    DEFAULT_RETRIES,
    DEFAULT_RHO,
    DEFAULT_SEED,
    DEFAULT_SIGMA,
    DEFAULT_SOURCE_LANGUAGE,
    DEFAULT_TIMEOUT_SECONDS,
    DEFAULT_WORKERS,
)
from errors import ConfigError, DataError
from logger_config import logger
from perturb import PerturbConfig
from repair import VotingStrategy
from utils import parse_csv_list
from voting import SprtParams


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a run, as one flat document."""

    epsilon: Optional[float] = None
    calibration: Optional[str] = None
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    rho: float = DEFAULT_RHO
    sigma: float = DEFAULT_SIGMA
    budget: int = DEFAULT_BUDGET
    method: str = DEFAULT_METHOD
    g: int = DEFAULT_G
    L: int = DEFAULT_L
    languages: Tuple[str, ...] = ()
    source_language: str = DEFAULT_SOURCE_LANGUAGE
    seed: int = DEFAULT_SEED
    voting: str = VotingStrategy.SPRT.value
    fsst_samples: int = DEFAULT_FSST_SAMPLES
    translator_url: Optional[str] = None
    classifier_url: Optional[str] = None
    labels: Tuple[str, ...] = ()
    models: Tuple[str, ...] = ()
    embeddings: Optional[str] = None
    out: Optional[str] = None
    workers: int = DEFAULT_WORKERS
    timeout: float = DEFAULT_TIMEOUT_SECONDS
    retries: int = DEFAULT_RETRIES

    def sprt_params(self) -> SprtParams:
        return SprtParams(alpha=self.alpha, beta=self.beta, rho=self.rho, sigma=self.sigma)

    def perturb_config(self) -> PerturbConfig:
        return PerturbConfig(
            method=self.method,
            g=self.g,
            L=self.L,
            budget=self.budget,
            languages=self.languages,
            source_language=self.source_language,
            seed=self.seed,
        )

    def voting_strategy(self) -> VotingStrategy:
        try:
            return VotingStrategy(self.voting)
        except ValueError:
            raise ConfigError(
                f"unknown voting strategy '{self.voting}', "
                f"expected one of {[v.value for v in VotingStrategy]}"
            ) from None

    def validate(self) -> "RunConfig":
        """Raises ConfigError on the first violated invariant; returns self."""
        self.sprt_params()
        self.perturb_config()
        self.voting_strategy()
        if self.epsilon is not None and (not math.isfinite(self.epsilon) or self.epsilon < 0):
            raise ConfigError(f"epsilon must be a finite non-negative number, got {self.epsilon}")
        if self.fsst_samples < 1:
            raise ConfigError("fsst_samples must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.retries < 0:
            raise ConfigError("retries must be non-negative")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError(f"duplicate label names: {list(self.labels)}")
        return self

    def resolve_epsilon(self) -> float:
        """The configured epsilon, or the one stored in the calibration report."""
        if self.epsilon is not None:
            return self.epsilon
        if not self.calibration:
            raise ConfigError("no threshold given: pass --epsilon or --calibration")
        try:
            with open(self.calibration, "r", encoding="utf-8") as f:
                report = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"calibration report '{self.calibration}' is not JSON: {e}") from e
        epsilon = report.get("epsilon") if isinstance(report, dict) else None
        if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)) or epsilon < 0:
            raise DataError(f"calibration report '{self.calibration}' holds no valid epsilon")
        logger.debug(f"Using epsilon={epsilon} from {self.calibration}")
        return float(epsilon)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


_FIELD_TYPES: Dict[str, str] = {
    "epsilon": "float",
    "calibration": "str",
    "alpha": "float",
    "beta": "float",
    "rho": "float",
    "sigma": "float",
    "budget": "int",
    "method": "str",
    "g": "int",
    "L": "int",
    "languages": "list",
    "source_language": "str",
    "seed": "int",
    "voting": "str",
    "fsst_samples": "int",
    "translator_url": "str",
    "classifier_url": "str",
    "labels": "list",
    "models": "list",
    "embeddings": "str",
    "out": "str",
    "workers": "int",
    "timeout": "float",
    "retries": "int",
}


def _coerce(key: str, value: Any) -> Any:
    kind = _FIELD_TYPES[key]
    try:
        if kind == "list":
            return tuple(parse_csv_list(value))
        if isinstance(value, (list, tuple)):
            # QSettings splits unquoted values on commas
            value = ",".join(str(v) for v in value)
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind == "float":
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' expects {kind}, got {value!r}") from None


def read_config_file(path: str) -> Dict[str, Any]:
    """Reads the default section of an INI file into field-name -> value."""
    if not os.path.isfile(path):
        raise DataError(f"config file '{path}' not found")
    settings = QSettings(path, QSettings.Format.IniFormat)
    if settings.status() != QSettings.Status.NoError:
        raise DataError(f"config file '{path}' could not be parsed")

    by_lower = {name.lower(): name for name in _FIELD_TYPES}
    values: Dict[str, Any] = {}
    for key in settings.childKeys():
        name = by_lower.get(key.lower())
        if name is None:
            logger.warning(f"Unknown key '{key}' in {path}, ignoring.")
            continue
        values[name] = _coerce(name, settings.value(key))
    logger.debug(f"Read {len(values)} setting(s) from {path}")
    return values


def load_run_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Defaults, then the config file, then every override that is not None."""
    values: Dict[str, Any] = {}
    if path:
        values.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown setting '{key}'")
        values[key] = _coerce(key, value)
    return RunConfig(**values).validate()
