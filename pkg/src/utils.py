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
from typing import Any, List, Optional, Sequence, Union

import numpy as np

def derive_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Returns a generator seeded from (seed, index).

    Batch commands give every record its own stream so results do not depend on
    which worker picked the record up.
    """
    return np.random.default_rng([int(seed), int(index)])


def parse_csv_list(value: Union[None, str, Sequence[str]]) -> List[str]:
    """Splits a comma separated value into a list of stripped, non-empty items.

    QSettings already turns "a,b" into a list when reading INI files, so both
    shapes are accepted.
    """
    if value is None:
        return []
    if isinstance(value, str):
        items = value.split(",")
    else:
        items = [str(item) for item in value]
    return [item.strip() for item in items if item and item.strip()]


def to_ms(seconds: Optional[float]) -> Optional[float]:
    if seconds is None:
        return None
    return round(seconds * 1000.0, 3)


def dump_json_line(record: Any) -> str:
    """Serialises one report record; key order is kept so replays stay byte-identical."""
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))
