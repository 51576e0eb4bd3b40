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


import logging
import os

from logger_config import log_run_settings, logger, resolve_log_dir, set_console_level


def _log_text():
    with open(os.path.join(resolve_log_dir(), "app.log"), "r", encoding="utf-8") as f:
        return f.read()


def test_log_dir_comes_from_the_environment():
    assert resolve_log_dir() == os.environ["TEXT_REPAIR_LOG_DIR"]


def test_run_settings_are_logged_without_empty_values():
    log_run_settings("detect", {"epsilon": 0.25, "labels": (), "out": None, "workers": 2})
    line = [l for l in _log_text().splitlines() if "Running 'detect'" in l][-1]
    assert "epsilon=0.25" in line
    assert "workers=2" in line
    assert "labels" not in line
    assert "out=" not in line


def test_console_level_leaves_the_file_at_debug():
    set_console_level(logging.WARNING)
    set_console_level("loud")
    logger.debug("file still records debug")
    assert "file still records debug" in _log_text()
    assert "Invalid log level type" in _log_text()
