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

APP_NAME = "py-text-repair"

# Probability vectors are clamped to this floor before any KL computation
PROB_FLOOR = 1e-12
PROB_SUM_TOLERANCE = 1e-6
# Remote backends may return rows that are slightly off; anything further
# away than this is rejected instead of renormalised
REMOTE_PROB_SUM_TOLERANCE = 1e-3

# Detection / calibration
DEFAULT_CALIBRATION_RANGE = (0.0, 10.0)
DEFAULT_CALIBRATION_TOL = 1e-3
MAX_CALIBRATION_ITERATIONS = 100
MIN_CONFIDENT_CALIBRATION_SIZE = 20

# Hypothesis testing
DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.1
DEFAULT_RHO = 0.8
DEFAULT_SIGMA = 0.16
DEFAULT_FSST_SAMPLES = 100
DEFAULT_SIMULATION_MAX_SAMPLES = 10_000

# Perturbation
DEFAULT_METHOD = "subw"
DEFAULT_G = 4
DEFAULT_L = 5
DEFAULT_BUDGET = 650
DEFAULT_SOURCE_LANGUAGE = "en"
# Candidate spaces up to this size are enumerated in a seeded random order,
# larger ones are sampled with rejection of already tried assignments
MAX_ENUMERATED_ASSIGNMENTS = 20_000

# Services
DEFAULT_TIMEOUT_SECONDS = 10.0
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF_SECONDS = 0.5
DEFAULT_MAX_IN_FLIGHT = 4

# Runs
DEFAULT_SEED = 0
DEFAULT_WORKERS = 1
TRAIN_TEST_SPLIT = 0.2

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_IO_ERROR = 2
EXIT_TRANSPORT_ERROR = 3
