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

import json
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from errors import DataError
from logger_config import logger


@dataclass(frozen=True)
class JsonlRecord:
    """One non-blank line of a JSONL file: either a parsed object or an error."""

    line_number: int
    data: Optional[dict] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def read_jsonl_records(path: str) -> Iterator[JsonlRecord]:
    """Yields every non-blank line; malformed lines come back with `error` set."""
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                logger.warning(f"{path}: skipping malformed line {line_number}: {e}")
                yield JsonlRecord(line_number=line_number, error=f"invalid JSON: {e}")
                continue
            if not isinstance(data, dict):
                logger.warning(f"{path}: line {line_number} is not a JSON object")
                yield JsonlRecord(line_number=line_number, error="not a JSON object")
                continue
            yield JsonlRecord(line_number=line_number, data=data)


def require_text(record: JsonlRecord) -> str:
    if not record.ok:
        raise DataError(record.error, record.line_number)
    text = record.data.get("text")
    if not isinstance(text, str):
        raise DataError('missing or non-string "text"', record.line_number)
    if not text.strip():
        raise DataError('"text" is empty', record.line_number)
    return text


def load_labeled_dataset(path: str) -> List[Tuple[str, str]]:
    """Reads JSONL {"text", "label"} lines; any bad line is an error naming its number."""
    dataset: List[Tuple[str, str]] = []
    for record in read_jsonl_records(path):
        text = require_text(record)
        label = record.data.get("label")
        if not isinstance(label, str) or not label:
            raise DataError('missing or non-string "label"', record.line_number)
        dataset.append((text, label))
    logger.debug(f"Loaded {len(dataset)} labeled texts from {path}")
    return dataset


def load_scored_records(path: str) -> List[Tuple[float, bool]]:
    """Reads JSONL {"d_kl", "adversarial"} lines for threshold calibration."""
    scored: List[Tuple[float, bool]] = []
    for record in read_jsonl_records(path):
        if not record.ok:
            raise DataError(record.error, record.line_number)
        d_kl = record.data.get("d_kl")
        truth = record.data.get("adversarial")
        if isinstance(d_kl, bool) or not isinstance(d_kl, (int, float)) or not math.isfinite(d_kl):
            raise DataError('missing or non-numeric "d_kl"', record.line_number)
        if not isinstance(truth, bool):
            raise DataError('missing or non-boolean "adversarial"', record.line_number)
        scored.append((float(d_kl), truth))
    return scored
