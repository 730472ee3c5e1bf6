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

#ifndef ROBBINS_CORE_HPP_
#define ROBBINS_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robbins/rng.hpp"

namespace robbins {

// One realized sequence of i.i.d. uniform values, optionally with arrival
// times. Immutable after sampling.
struct GameInstance {
  std::vector<double> values;
  std::optional<std::vector<double>> arrival_times;
  StreamId seed;

  std::size_t n() const { return values.size(); }
};

// Relative ranks r_k (rank among the first k) and final ranks R_k (rank
// among all n). Ties are broken by index: an earlier equal value ranks lower.
struct RankView {
  std::vector<std::size_t> relative_ranks;
  std::vector<std::size_t> final_ranks;
};

enum class Decision { kPass, kAccept };

// Behavioral contract shared by every selection rule.
//
// `k` is 1-based, `history` holds the k-1 earlier values. Implementations
// must be deterministic in their inputs. The evaluator forces acceptance at
// k == n regardless of the returned decision.
class StrategyPolicy {
 public:
  virtual ~StrategyPolicy() = default;
  virtual Decision decide(std::size_t k, double x,
                          std::span<const double> history,
                          std::size_t n) const = 0;
  // True when decide() never looks at `history`. Lets the evaluator skip
  // storing it.
  virtual bool memoryless() const { return false; }
};

// Adapts a lambda to StrategyPolicy.
class FunctionPolicy final : public StrategyPolicy {
 public:
  using Fn = std::function<Decision(std::size_t, double,
                                    std::span<const double>, std::size_t)>;
  explicit FunctionPolicy(Fn fn, bool memoryless = false)
      : fn_(std::move(fn)), memoryless_(memoryless) {}
  Decision decide(std::size_t k, double x, std::span<const double> history,
                  std::size_t n) const override {
    return fn_(k, x, history, n);
  }
  bool memoryless() const override { return memoryless_; }

 private:
  Fn fn_;
  bool memoryless_;
};

struct EvalReport {
  double mean_rank = 0.0;
  double std_error = 0.0;
  std::uint64_t replications = 0;
  std::uint64_t seed = 0;
  std::string rng_algorithm;
};

// n i.i.d. U[0,1] values drawn from `seed`. With `timed`, arrival times are
// the sorted order statistics of n further uniforms scaled to [0, horizon].
GameInstance sample_instance(std::size_t n, StreamId seed, bool timed = false,
                             double horizon = 1.0);

RankView rank_view(std::span<const double> values);

// Absolute rank #{j : X_j <= X_k} of the (1-based) accepted index, with
// index tie-breaking.
std::size_t loss_of(const GameInstance& instance, std::size_t accepted_index);

// Plays `policy` on one instance; returns the accepted (1-based) index.
std::size_t play(const StrategyPolicy& policy, const GameInstance& instance);

// Monte Carlo estimate of the expected final rank of the accepted item.
//
// Replication r draws its values from derive_stream(seed, r); the prefix up
// to the acceptance index coincides with sample_instance(n, that stream).
// The number of later values below the accepted one is drawn as a binomial
// count from an auxiliary stream, which has the same law as generating the
// tail explicitly.
EvalReport evaluate_policy(const StrategyPolicy& policy, std::size_t n,
                           std::uint64_t replications, std::uint64_t seed);

struct CorrelationReport {
  double correlation = 0.0;
  double std_error = 0.0;  // from independent batch correlations
  std::uint64_t replications = 0;
};

// Sample correlation of (X_k, R_k) over full instances of size n.
CorrelationReport correlation_check(std::size_t n, std::uint64_t replications,
                                    std::size_t k, std::uint64_t seed);

// Runs fn(begin, end) over [0, count) on worker threads. Chunking is
// deterministic; callers write results by index.
void parallel_for(std::uint64_t count,
                  const std::function<void(std::uint64_t, std::uint64_t)>& fn);

// Mean and standard error of a sample, summed in index order.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(std::span<const double> xs);

}  // namespace robbins

#endif  // ROBBINS_CORE_HPP_
