// Copyright 2026 The Robbins Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "robbins/errors.hpp"
#include "robbins/numerics.hpp"
#include "robbins/poisson_ode.hpp"

using namespace robbins;

namespace {

// int_0^1 min(1 + x t, w) dx for h = 0.
double rhs_zero_oracle(double t, double w) {
  if (w <= 1.0) return w;
  if (w >= 1.0 + t) return 1.0 + 0.5 * t;
  const double xs = (w - 1.0) / t;
  return xs + 0.5 * t * xs * xs + (1.0 - xs) * w;
}

}  // namespace

TEST_CASE("poisson sampling") {
  double total = 0.0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    const auto inst = sample_poisson(6.0, derive_stream(2, r));
    total += inst.points.size();
    for (std::size_t i = 0; i < inst.points.size(); ++i) {
      CHECK(inst.points[i].arrival >= 0.0);
      CHECK(inst.points[i].arrival <= 6.0);
      if (i > 0) CHECK(inst.points[i - 1].arrival <= inst.points[i].arrival);
    }
  }
  // Poisson(6) mean with se sqrt(6 / reps).
  CHECK(std::abs(total / reps - 6.0) < 4.0 * std::sqrt(6.0 / reps));
}

TEST_CASE("mu is the integral of phi") {
  for (double c : {1.5, 2.0, 3.0}) {
    for (double t : {0.5, 5.0, 20.0}) {
      const ContinuousThreshold ct(c, t);
      for (double s : {0.0, 0.3 * t, t}) {
        const double numeric =
            numerics::gauss_legendre([&](double u) { return ct.phi(u); }, 0.0, s, 64);
        CHECK(mu_of(ct, s) == doctest::Approx(numeric).epsilon(1e-10));
      }
    }
  }
  CHECK_THROWS_AS(ContinuousThreshold(2.0, 3.0, ThresholdForm::kUnitHorizon),
                  InvalidArgument);
}

TEST_CASE("value of threshold play against simulation") {
  for (double c : {1.5, 2.5}) {
    const ContinuousThreshold ct(c, 8.0);
    const auto w = value_W(ct, default_penalty());
    const auto mc = simulate_threshold_play(ct, default_penalty(), 40000, 13);
    CHECK(std::abs(w.value - mc.mean) < 4.0 * mc.se);
    CHECK(w.error_estimate < 1e-6);
  }
}

TEST_CASE("W vanishes at the empty horizon") {
  const ContinuousThreshold ct(2.0, 1e-9);
  CHECK(std::abs(value_W(ct, default_penalty()).value) < 1e-6);
}

TEST_CASE("survival follows e^{-mu}") {
  const ContinuousThreshold ct(2.0, 10.0);
  for (double s : {2.0, 6.0}) {
    const auto mc = simulate_survival(ct, s, 40000, 3);
    CHECK(std::abs(mc.mean - std::exp(-mu_of(ct, s))) < 4.0 * mc.se + 1e-12);
  }
}

TEST_CASE("best c lies in the interior") {
  const double c = best_c(20.0, default_penalty());
  CHECK(c > 1.05);
  CHECK(c < 4.0);
  const ContinuousThreshold at(c, 20.0), off(c + 0.3, 20.0);
  CHECK(value_W(at, default_penalty()).value <= value_W(off, default_penalty()).value);
}

TEST_CASE("ODE right-hand side with zero h") {
  ZeroH zero;
  for (double t : {0.0, 0.5, 3.0, 40.0}) {
    for (double w : {0.0, 0.7, 1.0, 1.3, 2.5, 30.0}) {
      CHECK(ode_rhs_integral(zero, t, w) ==
            doctest::Approx(rhs_zero_oracle(t, w)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ODE right-hand side with a kinked h") {
  // h linear on [0, 0.3] and [0.3, 1]; compare with dense quadrature.
  const std::vector<double> grid_t = {0.0, 10.0};
  const std::vector<double> grid_x = {0.0, 0.3, 1.0};
  HTable h(grid_t, grid_x, {{0.0, 0.8, 0.2}, {0.0, 0.5, 1.5}},
           {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
  for (double t : {1.0, 4.0}) {
    for (double w : {0.5, 1.2, 2.0}) {
      const double dense = numerics::gauss_legendre(
          [&](double x) { return std::min(1.0 + x * t, w + h(t, x)); }, 0.0, 1.0, 20000);
      CHECK(ode_rhs_integral(h, t, w) == doctest::Approx(dense).epsilon(1e-9));
    }
  }
}

TEST_CASE("h table interpolation and round trip") {
  HTable h({0.0, 1.0}, {0.0, 1.0}, {{0.0, 1.0}, {2.0, 3.0}}, {{0.1, 0.1}, {0.1, 0.1}});
  CHECK(h(0.5, 0.5) == doctest::Approx(1.5));
  CHECK(h(7.0, 0.25) == doctest::Approx(2.25));  // last row held
  const HTable back = HTable::from_json(h.to_json());
  CHECK(back.values() == h.values());
  CHECK(back.grid_x() == h.grid_x());
  CHECK_THROWS_AS(HTable::from_json("{\"grid_t\": [0]}"), InvalidArgument);
}

TEST_CASE("zero h keeps w at its initial value") {
  OdeProblem p;
  p.h = std::make_shared<ZeroH>();
  p.t_max = 100.0;
  const auto sol = ode_solve(p);
  CHECK(std::abs(sol.limit_estimate) < 1e-12);
}

TEST_CASE("constant h: the limit grows with h") {
  double previous = -1.0;
  for (double kappa : {0.25, 0.5, 1.0}) {
    OdeProblem p;
    p.h = std::make_shared<ConstantH>(kappa);
    p.t_max = 1000.0;
    const auto sol = ode_solve(p);
    CHECK(sol.limit_estimate > previous);
    previous = sol.limit_estimate;
  }
}

TEST_CASE("tolerance halving is self-consistent") {
  OdeProblem p;
  p.h = std::make_shared<ConstantH>(0.5);
  p.t_max = 200.0;
  const auto a = ode_solve(p);
  p.rel_tol /= 2.0;
  p.abs_tol /= 2.0;
  const auto b = ode_solve(p);
  CHECK(std::abs(a.limit_estimate - b.limit_estimate) <= 1e-6 * std::abs(b.limit_estimate));
  CHECK(b.accepted_steps >= a.accepted_steps);
}

TEST_CASE("simulated h table is usable on its informative cells") {
  HGridSpec grid{{0.0, 5.0, 20.0}, {0.0, 0.1, 0.5, 1.0}};
  const auto table = h_from_simulation(grid, 3000, 4);
  for (std::size_t i = 0; i < grid.grid_t.size(); ++i) {
    for (std::size_t j = 0; j < grid.grid_x.size(); ++j) {
      CHECK(table.values()[i][j] >= -1e-12);
    }
    // Accepting a value above x = 1 is impossible.
    CHECK(table.values()[i].back() == doctest::Approx(0.0));
  }
}
