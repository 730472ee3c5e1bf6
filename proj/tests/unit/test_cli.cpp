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

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "robbins/cli.hpp"

using nlohmann::json;
using robbins::cli::run;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
  json last() const {
    std::istringstream in(out);
    std::string line, last_line;
    while (std::getline(in, line)) {
      if (!line.empty()) last_line = line;
    }
    return json::parse(last_line);
  }
  std::size_t lines() const {
    std::size_t count = 0;
    for (char c : out) count += c == '\n';
    return count;
  }
};

Result call(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  Result r;
  r.code = run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("exact") {
  const auto r = call({"exact", "--n", "2"});
  CHECK(r.code == 0);
  CHECK(r.last()["value"].get<double>() == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(call({"exact", "--n", "7"}).code == 3);
  CHECK(call({"exact", "--n", "0"}).code == 2);
  CHECK(call({"exact", "--n", "two"}).code == 2);
  CHECK(call({"exact"}).code == 2);
}

TEST_CASE("usage errors") {
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"ode", "--h", "quadratic"}).code == 2);
  CHECK(call({"ode", "--penalty", "cubic"}).code == 2);
  CHECK(call({"play", "--objective", "WIN"}).code == 2);
}

TEST_CASE("secretary and truncate") {
  const auto s = call({"secretary", "--n", "4"});
  CHECK(s.code == 0);
  CHECK(s.last()["cutoff"] == 2);
  CHECK(s.last()["success_prob"].get<double>() == doctest::Approx(11.0 / 24.0));
  const auto t = call({"truncate", "--n", "3", "--level", "2"});
  CHECK(t.code == 0);
  CHECK(t.last()["value"].get<double>() == doctest::Approx(2.0 - 0.684293).epsilon(1e-3));
}

TEST_CASE("ml-opt") {
  const auto fam = call({"ml-opt", "--n", "2"});
  CHECK(fam.code == 0);
  CHECK(fam.last()["value"].get<double>() == doctest::Approx(1.25).epsilon(1e-6));
  const auto free = call({"ml-opt", "--n", "3", "--free"});
  CHECK(free.code == 0);
  CHECK(free.last()["value"].get<double>() == doctest::Approx(1.400879).epsilon(1e-5));
  CHECK(call({"ml-opt", "--n", "500", "--free"}).code == 3);
}

TEST_CASE("correlate") {
  const auto r = call({"correlate", "--n", "3", "--reps", "20000", "--seed", "5"});
  CHECK(r.code == 0);
  const json j = r.last();
  CHECK(j["reference"].get<double>() == doctest::Approx(std::sqrt(0.5)));
  CHECK(std::abs(j["correlation"].get<double>() - std::sqrt(0.5)) <
        5.0 * j["std_error"].get<double>());
  CHECK(j["rng"] == "philox4x32-10");
  CHECK(call({"correlate", "--n", "3", "--reps", "20000", "--seed", "5"}).out == r.out);
}

TEST_CASE("cloud-search writes one line per round and a summary") {
  const auto r = call({"cloud-search", "--n", "20", "--batch", "50", "--rounds", "4",
                       "--seed", "3", "--scale-c", "0.1"});
  CHECK(r.code == 0);
  CHECK(r.lines() == 5);
  CHECK(r.last()["summary"] == true);
  CHECK(r.last()["rounds"] == 4);
}

TEST_CASE("poisson-w and ode") {
  const auto w = call({"poisson-w", "--c", "2", "--t", "5", "--mc", "20000"});
  CHECK(w.code == 0);
  const json j = w.last();
  CHECK(std::abs(j["W"].get<double>() - j["mc_mean"].get<double>()) <
        5.0 * j["mc_se"].get<double>());
  const auto o = call({"ode", "--h", "zero", "--tmax", "50"});
  CHECK(o.code == 0);
  CHECK(o.last()["limit"].get<double>() == doctest::Approx(0.0).epsilon(1e-6));
  const auto k = call({"ode", "--h", "const:0.5", "--tmax", "50"});
  CHECK(k.code == 0);
  CHECK(k.last()["limit"].get<double>() > 0.0);
}

TEST_CASE("play reads decisions from stdin") {
  const auto r = call({"play", "--m", "10", "--seed", "4"}, "p\np\na\n");
  CHECK(r.code == 0);
  const json rec = r.last();
  CHECK(rec["status"] != "OPEN");
  const auto& d = rec["decisions"];
  REQUIRE(d.size() >= 1);
  if (d.size() >= 3) {
    CHECK(d[0] == "PASS");
    CHECK(d[2] == "ACCEPT");
    CHECK(d.size() == 3);
  }
  // Running out of input passes to the end.
  const auto all_pass = call({"play", "--m", "10", "--seed", "4"});
  CHECK(all_pass.last()["outcome"]["forced"] == true);
}
