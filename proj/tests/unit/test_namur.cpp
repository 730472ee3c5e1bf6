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
#include <numbers>
#include <set>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "robbins/errors.hpp"
#include "robbins/namur.hpp"

using namespace robbins;
using namespace robbins::namur;

namespace {

DistributionBasket uniform_only() {
  DistributionBasket b;
  b.entries = {{"uniform", Family::kUniform, 1.0}};
  return b;
}

DistributionBasket uniform_and_ramp() {
  DistributionBasket b;
  b.entries = {{"uniform", Family::kUniform, 1.0}, {"ramp", Family::kPower, 2.0}};
  return b;
}

DistributionBasket mixed_basket() {
  DistributionBasket b;
  b.a = 2.0;
  b.b = 5.0;
  b.entries = {{"uniform", Family::kUniform, 1.0},
               {"ramp", Family::kPower, 2.5},
               {"early", Family::kReversePower, 1.7},
               {"decay", Family::kExponential, 3.0},
               {"growth", Family::kExponential, -2.0}};
  return b;
}

// Adaptive quadrature of (G(u)/G(T_j) - F_emp(u))^2 piece by piece.
double distance_oracle(std::vector<double> t, const DistributionBasket& b,
                       std::size_t e) {
  std::sort(t.begin(), t.end());
  const double j = static_cast<double>(t.size());
  const double gt = b.cdf(e, t.back());
  double total = 0.0, left = b.a;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double level = static_cast<double>(i) / j;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double u) {
          const double d = b.cdf(e, u) / gt - level;
          return d * d;
        },
        left, t[i], 10, 1e-13);
    left = t[i];
  }
  return total / (b.b - b.a);  // distances are reported in normalized time
}

bool keys_subset(const nlohmann::json& j, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("distribution families invert") {
  for (const auto& d : mixed_basket().entries) {
    CHECK(d.cdf(0.0) == doctest::Approx(0.0));
    CHECK(d.cdf(1.0) == doctest::Approx(1.0));
    for (double p : {0.01, 0.3, 0.5, 0.9}) {
      CHECK(d.cdf(d.quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
    const double mass = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double z) { return d.pdf(z); }, 0.0, 1.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("basket files round trip") {
  const auto b = mixed_basket();
  const auto back = basket_from_json(basket_to_json(b));
  REQUIRE(back.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < b.entries.size(); ++i) {
    CHECK(back.entries[i].name == b.entries[i].name);
    CHECK(back.entries[i].family == b.entries[i].family);
    CHECK(back.entries[i].param == b.entries[i].param);
  }
  CHECK_THROWS_AS(basket_from_json(nlohmann::json::parse(R"({"entries": []})")),
                  InvalidArgument);
  CHECK_THROWS_AS(
      basket_from_json(nlohmann::json::parse(R"({"entries": [{"family": "cauchy"}]})")),
      InvalidArgument);
  CHECK_THROWS_AS(basket_from_json(nlohmann::json::parse(
                      R"({"a": 1, "b": 1, "entries": [{"family": "uniform"}]})")),
                  InvalidArgument);
}

TEST_CASE("closed-form fit distance matches quadrature") {
  const auto b = mixed_basket();
  Philox4x32 g(StreamId{8, 1});
  for (std::size_t trial = 0; trial < 5; ++trial) {
    std::vector<double> t(3 + 7 * trial);
    for (auto& x : t) x = b.a + (b.b - b.a) * g.uniform();
    const auto d = fit_distances(t, b);
    for (std::size_t e = 0; e < b.entries.size(); ++e) {
      CHECK(d[e] == doctest::Approx(distance_oracle(t, b, e)).epsilon(1e-9));
    }
  }
}

TEST_CASE("singleton basket always fits") {
  const std::vector<double> t = {0.9, 0.95};
  CHECK(fit_distribution(t, uniform_only()) == 0);
  CHECK_THROWS_AS(fit_distribution(std::vector<double>{}, uniform_only()), InvalidArgument);
}

TEST_CASE("ties in the fit go to the lowest index") {
  DistributionBasket twins;
  twins.entries = {{"one", Family::kUniform, 1.0}, {"two", Family::kUniform, 1.0}};
  const std::vector<double> t = {0.2, 0.7};
  CHECK(fit_distribution(t, twins) == 0);
}

TEST_CASE("fit selects the ramp from its own samples") {
  const auto b = uniform_and_ramp();
  int hits = 0;
  for (std::uint64_t trial = 0; trial < 300; ++trial) {
    Philox4x32 g(derive_stream(31, trial));
    std::vector<double> t(1000);
    for (auto& x : t) x = std::sqrt(g.uniform());
    hits += fit_distribution(t, b) == 1;
  }
  CHECK(hits >= 297);
}

TEST_CASE("posterior over N") {
  const auto b = uniform_only();
  // j = 1 at time 0.5 with M = 3: weights N (1/2)^{N-1} = 1, 1, 3/4.
  const auto p = n_posterior(1, 0.5, b, 0, 3);
  CHECK(p[0] == doctest::Approx(1.0 / 2.75));
  CHECK(p[1] == doctest::Approx(1.0 / 2.75));
  CHECK(p[2] == doctest::Approx(0.75 / 2.75));
  const auto q = n_posterior(4, 0.3, b, 0, 10);
  for (std::size_t n = 1; n < 4; ++n) CHECK(q[n - 1] == 0.0);
  double sum = 0.0;
  for (double x : q) sum += x;
  CHECK(sum == doctest::Approx(1.0));
  const auto end = n_posterior(4, 1.0, b, 0, 10);
  CHECK(end[3] == 1.0);
  CHECK_THROWS_AS(n_posterior(11, 0.5, b, 0, 10), InvalidArgument);
}

TEST_CASE("joint posterior is a distribution") {
  const auto b = mixed_basket();
  const std::vector<double> t = {2.1, 2.4, 3.0};
  const auto post = joint_posterior(t, 3.2, b, 20);
  double sum = 0.0;
  for (const auto& row : post) {
    for (std::size_t n = 1; n < 3; ++n) CHECK(row[n - 1] == 0.0);
    for (double w : row) {
      CHECK(w >= 0.0);
      sum += w;
    }
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("hidden N is uniform on 1..M") {
  const std::size_t m = 100, sessions = 10000;
  std::vector<double> counts(m, 0.0);
  for (std::uint64_t s = 0; s < sessions; ++s) {
    counts[new_session(m, uniform_only(), s).hidden_n() - 1] += 1.0;
  }
  const double expected = static_cast<double>(sessions) / m;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99 degrees of freedom, 1% upper critical value.
  CHECK(chi2 < 134.642);
}

TEST_CASE("sessions reveal only times and relative ranks") {
  SessionOptions opts;
  opts.objective = top_percent(10);
  opts.secret_objective = true;
  auto s = new_session(50, default_basket(), 4, opts);
  const std::set<std::string> allowed = {"id", "M", "basket", "a", "b", "mode",
                                         "arrivals", "decisions", "status", "objective"};
  auto check_public = [&] {
    const auto j = s.public_state().to_json();
    CHECK(keys_subset(j, allowed));
    for (const auto& a : j["arrivals"]) CHECK(keys_subset(a, {"t", "rel_rank"}));
    if (!s.closed()) CHECK_FALSE(j.contains("objective"));
  };
  check_public();
  CHECK_THROWS_AS(s.record(), Conflict);
  while (!s.closed()) {
    s.advance();
    check_public();
  }
  CHECK(s.public_state().to_json()["objective"] == "TOP_PERCENT(10)");
}

TEST_CASE("passing every arrival forces the last one") {
  auto s = new_session(30, default_basket(), 12);
  std::size_t arrivals = 0;
  while (!s.closed()) {
    if (s.advance()) {
      ++arrivals;
      s.decide(Decision::kPass);
    }
  }
  CHECK(arrivals == s.hidden_n());
  CHECK(s.status() == Status::kExhausted);
  const auto& o = *s.outcome();
  CHECK(o.forced);
  CHECK(o.accepted_index == s.hidden_n());
  const auto v = s.hidden_values();
  std::size_t rank = 1;
  for (double x : v) rank += x < v.back();
  CHECK(o.final_rank == rank);
  CHECK_THROWS_AS(s.advance(), Conflict);
}

TEST_CASE("a single arrival is the best") {
  auto s = new_session(1, default_basket(), 99);
  REQUIRE(s.advance().has_value());
  s.decide(Decision::kAccept);
  CHECK(s.status() == Status::kAccepted);
  CHECK(s.outcome()->final_rank == 1);
  CHECK_THROWS_AS(s.decide(Decision::kAccept), Conflict);
}

TEST_CASE("decisions need a pending arrival") {
  auto s = new_session(10, default_basket(), 5);
  CHECK_THROWS_AS(s.decide(Decision::kPass), Conflict);
  s.advance();
  s.decide(Decision::kPass);
  if (!s.closed()) CHECK_THROWS_AS(s.decide(Decision::kPass), Conflict);
}

TEST_CASE("replay reproduces the record") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    auto s = new_session(40, default_basket(), seed);
    std::size_t step = 0;
    while (!s.closed()) {
      if (!s.advance()) break;
      ++step;
      if (step % 7 == 0) s.decide(Decision::kAccept);
      else if (step % 3 == 0) s.decide(Decision::kPass);
      // otherwise leave it undecided; the next advance passes it
    }
    const auto record = s.record();
    const auto again = Session::replay(record);
    CHECK(again.decisions() == s.decisions());
    CHECK(again.record().dump() == record.dump());
  }
}

TEST_CASE("machine mode plays itself") {
  SessionOptions opts;
  opts.mode = "machine";
  auto s = new_session(60, default_basket(), 8, opts);
  CHECK(s.closed());
  CHECK(s.machine_outcome()->final_rank == s.outcome()->final_rank);
  CHECK(Session::replay(s.record()).record().dump() == s.record().dump());
}

TEST_CASE("machine plays the 1/e rule in fitted time") {
  SessionOptions opts;
  opts.fixed_n = 200;
  int wins = 0;
  const int sessions = 100000;
  double earliest = 1.0;
  for (int i = 0; i < sessions; ++i) {
    const auto s = Session::create("e", 200, uniform_only(), i, opts);
    const auto o = machine_play(s, exact_rank(1));
    wins += o.final_rank == 1;
    if (!o.forced) earliest = std::min(earliest, s.hidden_times()[o.accepted_index - 1]);
  }
  CHECK(std::abs(wins / static_cast<double>(sessions) - 1.0 / std::numbers::e) < 0.01);
  CHECK(earliest >= 1.0 / std::numbers::e);
}

TEST_CASE("a looser objective succeeds more often on the same games") {
  int strict = 0, loose = 0;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    const auto s = new_session(300, default_basket(), i);
    const auto a = machine_play(s, exact_rank(1));
    const auto b = machine_play(s, top_percent(50));
    strict += exact_rank(1).satisfied(a.final_rank, a.n);
    loose += top_percent(50).satisfied(b.final_rank, b.n);
  }
  CHECK(loose > strict);
}

TEST_CASE("machine decisions match the incremental player") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = new_session(80, mixed_basket(), seed);
    for (const auto& obj : {exact_rank(1), top_percent(20)}) {
      const auto fast = machine_play(s, obj);
      PublicHistory h;
      std::size_t pick = 0;
      const auto t = s.hidden_times();
      auto rel = rank_view(s.hidden_values()).relative_ranks;
      for (std::size_t k = 0; k < t.size(); ++k) {
        h.times.push_back(t[k]);
        h.relative_ranks.push_back(rel[k]);
        if (machine_decide(h, s.basket(), s.m(), obj) == Decision::kAccept) {
          pick = k + 1;
          break;
        }
      }
      if (pick == 0) pick = t.size();
      CHECK(fast.accepted_index == pick);
    }
  }
}

TEST_CASE("forced acceptance when N is known to be exhausted") {
  PublicHistory h{{0.1, 0.2, 0.3}, {1, 2, 3}};
  CHECK(machine_decide(h, uniform_only(), 3, exact_rank(1)) == Decision::kAccept);
  PublicHistory early{{0.1}, {1}};
  CHECK(machine_decide(early, uniform_only(), 3, exact_rank(1)) == Decision::kPass);
}

TEST_CASE("threshold tables") {
  const auto t = build_threshold_table(top_percent(20), 50, 3, 800, 4);
  CHECK(t.fractions.size() == 4);
  CHECK(t.training_success > 0.0);
  const auto back = ThresholdTable::from_json(t.to_json());
  CHECK(back.fractions == t.fractions);
  CHECK(back.build_seed == 3);
  ThresholdTable manual;
  manual.fractions = {0.0, 0.5};
  CHECK_FALSE(manual.accepts(0.2, 1, 10));
  CHECK(manual.accepts(0.7, 5, 10));
  CHECK_FALSE(manual.accepts(0.7, 6, 10));
  CHECK(manual.accepts(0.7, 1, 1));
}

TEST_CASE("objective labels") {
  CHECK(parse_objective("EXACT_RANK(3)")->label() == "EXACT_RANK(3)");
  CHECK(parse_objective("TOP_PERCENT(10)")->target == 10);
  CHECK_FALSE(parse_objective("TOP_PERCENT(0)").has_value());
  CHECK_FALSE(parse_objective("BEST").has_value());
  CHECK(top_percent(10).satisfied(3, 30));
  CHECK_FALSE(top_percent(10).satisfied(4, 30));
}

TEST_CASE("compatibility: rank 3 of 30 is in the top ten percent") {
  auto ledger = CompatibilityLedger::with_default_grid();
  const auto& u = ledger.update("g1", 3, 30);
  const auto& grid = ledger.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].label() == "TOP_PERCENT(10)") {
      CHECK(u.compatible[i]);
      // Not penalized: the in-band factor 1 / Z, the largest it can be.
      const double z = 3.0 + ledger.beta() * 27.0;
      CHECK(u.factors[i] == doctest::Approx(1.0 / z));
    }
  }
}

TEST_CASE("compatibility: rank 1 is compatible with every top percentage") {
  auto ledger = CompatibilityLedger::with_default_grid();
  const auto& u = ledger.update("g1", 1, 40);
  const auto& grid = ledger.grid();
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sum += grid[i].weight;
    if (grid[i].kind != ObjectiveKind::kTopPercent) continue;
    CHECK(u.compatible[i]);
    const double k = std::ceil(grid[i].target * 40 / 100.0);
    CHECK(u.factors[i] == doctest::Approx(1.0 / (k + ledger.beta() * (40 - k))));
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("ledger factors and bookkeeping") {
  CompatibilityLedger ledger({exact_rank(2), top_percent(50)}, 0.5, 0.25);
  const auto& u = ledger.update("g", 2, 4);
  // EXACT_RANK(2): 0.25^{|r-2|} over r = 1..4 sums to 1.5625.
  CHECK(u.factors[0] == doctest::Approx(1.0 / 1.5625));
  CHECK(u.factors[1] == doctest::Approx(1.0 / 3.0));
  CHECK(ledger.argmax() == 0);
  CHECK(ledger.to_json()["updates"].size() == 1);
  CHECK_THROWS_AS(ledger.update("bad", 5, 4), InvalidArgument);
  CHECK_THROWS_AS(CompatibilityLedger({}, 0.5), InvalidArgument);
  CHECK_THROWS_AS(CompatibilityLedger({exact_rank(1)}, 1.0), InvalidArgument);
}
