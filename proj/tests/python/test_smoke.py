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

"""Smoke tests for the python bindings."""

import json
import math

import pytest

import robbins


def test_exact_values():
    assert robbins.optimal_value(1)["value"] == 1.0
    assert robbins.optimal_value(2)["value"] == pytest.approx(1.25, abs=1e-6)
    with pytest.raises(robbins.ResourceBound):
        robbins.optimal_value(9)
    with pytest.raises(ValueError):
        robbins.optimal_value(0)


def test_secretary():
    cutoff, p = robbins.secretary_rule(4)
    assert cutoff == 2
    assert p == pytest.approx(11 / 24)
    assert robbins.secretary_success(4, 2) == pytest.approx(11 / 24)


def test_memoryless():
    phi = robbins.phi_family(2.0, 5)
    assert len(phi) == 5 and phi[-1] == 1.0
    assert robbins.expected_rank([0.5, 1.0]) == pytest.approx(1.25)
    c, value = robbins.optimize_c(2)
    assert value == pytest.approx(1.25, abs=1e-6)
    _, free = robbins.optimize_free(3)
    assert free == pytest.approx(1.400879, abs=1e-5)
    exact = robbins.expected_rank(phi)
    mc = robbins.evaluate_threshold(phi, 20000, seed=3)
    assert abs(mc.mean - exact) < 5 * mc.se


def test_correlation():
    corr, se = robbins.correlation_check(3, 20000, seed=1)
    assert abs(corr - math.sqrt(0.5)) < 5 * se


def test_cloud_baseline_matches_memoryless():
    base = robbins.cloud_batch(base_c=2.0, n=50, batch=4000, seed=9)
    phi = robbins.evaluate_threshold(robbins.phi_family(2.0, 50), 4000, seed=9)
    assert base.mean == phi.mean


def test_poisson_value_against_simulation():
    w = robbins.value_W(2.0, 5.0)
    mc = robbins.simulate_threshold_play(2.0, 5.0, 20000, seed=4)
    assert abs(w - mc.mean) < 5 * mc.se
    assert robbins.ode_limit(0.0, 100.0) == pytest.approx(0.0, abs=1e-9)


def test_namur():
    ramp = [math.sqrt((i + 0.5) / 500) for i in range(500)]
    assert robbins.fit_distribution(ramp) == 2  # default basket: late = power 2
    game = robbins.machine_game(50, 7, "TOP_PERCENT(20)")
    assert 1 <= game["final_rank"] <= game["n"] <= 50
    record = json.loads(robbins.play_record(20, 3, ["PASS", "ACCEPT"]))
    assert record["status"] == "ACCEPTED" or record["outcome"]["forced"]
    assert record["decisions"][:2] == ["PASS", "ACCEPT"][: len(record["decisions"])]
    with pytest.raises(ValueError):
        robbins.machine_game(50, 7, "WIN")
