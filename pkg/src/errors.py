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

from typing import Any, Optional


class ConfigError(ValueError):
    """A configuration value violates one of its invariants."""


class DataError(ValueError):
    """An input file could not be read or does not follow its schema."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmbeddingFormatError(DataError):
    pass


class TransportError(RuntimeError):
    """A remote backend could not be reached or kept failing after retries.

    These are retriable by nature; callers decide whether to try again later.
    """

    def __init__(self, message: str, backend_id: Optional[str] = None):
        if backend_id:
            message = f"[{backend_id}] {message}"
        super().__init__(message)
        self.backend_id = backend_id


class ProtocolError(TransportError):
    """The backend answered, but the answer does not follow the protocol."""


class UnperturbableInput(ValueError):
    """The input holds no word that can be substituted."""

    def __init__(self, message: str = "unperturbable input"):
        super().__init__(message)


class RepairAborted(RuntimeError):
    """A repair run stopped on a backend failure; keeps the partial stats."""

    def __init__(self, message: str, stats: Any, cause: Optional[Exception] = None):
        super().__init__(message)
        self.stats = stats
        self.cause = cause
