# Copyright 2026 The Robbins Lab Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Robbins' problem laboratory: exact values, threshold rules, searches."""

from robbins._robbins import (
    RNG_ALGORITHM,
    MeanSe,
    NumericalError,
    ResourceBound,
    cloud_batch,
    correlation_check,
    evaluate_threshold,
    expected_rank,
    fit_distribution,
    machine_game,
    ode_limit,
    optimal_value,
    optimize_c,
    optimize_free,
    phi_family,
    play_record,
    secretary_rule,
    secretary_success,
    simulate_threshold_play,
    truncated_value,
    value_W,
)

__all__ = [
    "RNG_ALGORITHM",
    "MeanSe",
    "NumericalError",
    "ResourceBound",
    "cloud_batch",
    "correlation_check",
    "evaluate_threshold",
    "expected_rank",
    "fit_distribution",
    "machine_game",
    "ode_limit",
    "optimal_value",
    "optimize_c",
    "optimize_free",
    "phi_family",
    "play_record",
    "secretary_rule",
    "secretary_success",
    "simulate_threshold_play",
    "truncated_value",
    "value_W",
]
