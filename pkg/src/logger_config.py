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
import logging.handlers
import os
import sys
from typing import Any, Mapping, Optional

from PySide6.QtCore import QStandardPaths

from constants import APP_NAME

LOG_DIR_ENV = "TEXT_REPAIR_LOG_DIR"

_logger_instance: Optional[logging.Logger] = None
_console_handler: Optional[logging.Handler] = None


def resolve_log_dir() -> str:
    """TEXT_REPAIR_LOG_DIR if set, else <AppData>/py-text-repair/logs."""
    override = os.environ.get(LOG_DIR_ENV)
    if override:
        return override
    data_location = QStandardPaths.writableLocation(
        QStandardPaths.StandardLocation.AppDataLocation
    )
    return os.path.join(data_location, APP_NAME, "logs")


def setup_logging() -> logging.Logger:
    global _logger_instance, _console_handler

    if _logger_instance is not None:
        return _logger_instance

    log_dir = resolve_log_dir()
    os.makedirs(log_dir, exist_ok=True)
    log_file_path = os.path.join(log_dir, "app.log")

    instance = logging.getLogger(APP_NAME)
    instance.setLevel(logging.DEBUG)
    instance.propagate = False
    if instance.hasHandlers():
        instance.handlers.clear()

    # Worker threads log too, so the file keeps the thread name
    file_handler = logging.handlers.TimedRotatingFileHandler(
        log_file_path, when="midnight", interval=1, backupCount=31, encoding="utf-8"
    )
    file_handler.setFormatter(
        logging.Formatter("%(asctime)s - %(name)s - %(threadName)s - %(levelname)s - %(message)s")
    )
    instance.addHandler(file_handler)

    # stdout belongs to the reports
    if os.environ.get("APP_ENV", "development").lower() != "production":
        _console_handler = logging.StreamHandler(sys.stderr)
        _console_handler.setLevel(logging.INFO)
        _console_handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(message)s"))
        instance.addHandler(_console_handler)

    instance.debug(f"Logging to file: {log_file_path}")
    _logger_instance = instance
    return instance


def set_console_level(level: int) -> None:
    """
    Changes how much reaches the console; the log file always records DEBUG.

    Args:
        level (int): The logging level (e.g., logging.DEBUG, logging.WARNING).
    """
    if not isinstance(level, int):
        logger.warning(f"Invalid log level type: {type(level)}. Expected an integer. Keeping current level.")
        return
    if _console_handler is None:
        logger.debug("No console handler in this environment, level unchanged")
        return
    _console_handler.setLevel(level)
    logger.debug(f"Console log level set to: {logging.getLevelName(level)}")


def log_run_settings(command: str, settings: Mapping[str, Any]) -> None:
    """Writes the effective settings of a run to the log, one line per run."""
    shown = ", ".join(f"{key}={value!r}" for key, value in settings.items() if value not in (None, ()))
    logger.info(f"Running '{command}' with {shown or 'defaults'}")


logger = setup_logging()
