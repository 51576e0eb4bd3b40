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

import os
import tempfile

# Must happen before logger_config is imported by any test module
os.environ.setdefault("TEXT_REPAIR_LOG_DIR", tempfile.mkdtemp(prefix="text-repair-logs-"))
os.environ.setdefault("APP_ENV", "production")

import pytest  # noqa: E402

from classifier import save_model  # noqa: E402
from fixture_world import build_world, write_embeddings, write_jsonl  # noqa: E402


@pytest.fixture(scope="session")
def world():
    return build_world(seed=0)


@pytest.fixture(scope="session")
def world_files(world, tmp_path_factory):
    """The fixture world on disk: embeddings, corpus and both trained models."""
    root = tmp_path_factory.mktemp("world")
    paths = {
        "embeddings": root / "embeddings.txt",
        "corpus": root / "corpus.jsonl",
        "model1": root / "model1.json",
        "model2": root / "model2.json",
    }
    write_embeddings(world.store, paths["embeddings"])
    write_jsonl([{"text": text, "label": label} for text, label in world.corpus], paths["corpus"])
    save_model(world.model1, str(paths["model1"]))
    save_model(world.model2, str(paths["model2"]))
    return {key: str(path) for key, path in paths.items()}
