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

#ifndef ROBBINS_CLOUD_SEARCH_HPP_
#define ROBBINS_CLOUD_SEARCH_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robbins/core.hpp"

namespace robbins {

// Reference value of the c-family memoryless rule for large n.
inline constexpr double kMemorylessReferenceU = 2.3318;
inline constexpr double kMemorylessReferenceC = 1.9469;

enum class CloudRule {
  // PASS when >= theta_pre earlier values sit in [x - d_pc, x);
  // ACCEPT above threshold when >= theta_post sit in (x, x + p_pc].
  kCount,
  // Same windows, but the override fires on the difference
  // N_pre - N_post (dissuade) or N_post - N_pre (persuade) reaching
  // delta_threshold.
  kLeftRightDifference,
};

// Overrides of the c-family memoryless rule driven by clouds of earlier
// values close to the current one. Overrides are inactive while their
// window width is zero, so the all-zero record is the baseline rule.
struct CloudPolicy {
  double base_c = kMemorylessReferenceC;
  double d_pc = 0.0;
  int theta_pre = 0;
  double p_pc = 0.0;
  int theta_post = 0;
  double accept_margin = 0.0;
  CloudRule rule = CloudRule::kCount;
  int delta_threshold = 0;

  friend bool operator==(const CloudPolicy&, const CloudPolicy&) = default;
};

void validate(const CloudPolicy& policy);

// Single decision; k is 1-based and `history` holds the k-1 earlier values.
Decision cloud_decide(const CloudPolicy& policy, std::size_t k, double x,
                      std::span<const double> history, std::size_t n);

// How a decision came about; used by tests and audit output.
enum class CloudOutcome { kBaseline, kDissuaded, kPersuaded, kForced };
CloudOutcome cloud_explain(const CloudPolicy& policy, std::size_t k, double x,
                           std::span<const double> history, std::size_t n);

class CloudStrategy final : public StrategyPolicy {
 public:
  explicit CloudStrategy(CloudPolicy policy);
  Decision decide(std::size_t k, double x, std::span<const double> history,
                  std::size_t n) const override {
    return cloud_decide(policy_, k, x, history, n);
  }
  bool memoryless() const override;

 private:
  CloudPolicy policy_;
};

MeanSe evaluate_batch(const CloudPolicy& policy, std::size_t n,
                      std::uint64_t batch, std::uint64_t seed);

// Step sizes of the perturbation kernel. Widths move multiplicatively by
// (1 +/- scale), or to `scale` when currently zero; counts move by +/-1
// when their step is nonzero. A zero scale freezes that parameter.
struct PerturbationScales {
  double base_c = 0.0;
  double d_pc = 0.0;
  int theta_pre = 0;
  double p_pc = 0.0;
  int theta_post = 0;
  double accept_margin = 0.0;
};

// Inclusive box the search stays in. Perturbations leaving it are redrawn.
struct SearchBounds {
  double base_c_min = 1.0 + 1e-6, base_c_max = 4.0;
  double width_max = 1.0;
  int count_max = 1000;
};

struct SearchConfig {
  std::size_t n = 10000;
  std::uint64_t batch = 20000;
  std::size_t rounds = 500;
  PerturbationScales scales;
  SearchBounds bounds;
  CloudPolicy start;
  std::uint64_t seed = 0;
  double reference_u = kMemorylessReferenceU;
  // Evaluate each round on a single instance instead of a batch.
  bool single_run = false;
};

enum class RoundAction { kKept, kRepeated, kPerturbed };
std::string to_string(RoundAction a);

struct SearchRecord {
  std::size_t round = 0;
  CloudPolicy policy;
  double mean = 0.0;
  double se = 0.0;
  RoundAction action = RoundAction::kKept;  // what happens next round
};

struct SearchState {
  CloudPolicy current;
  CloudPolicy best;
  double best_value = 0.0;
  std::vector<SearchRecord> history;
  double baseline_u = kMemorylessReferenceU;
};

// Scores a policy for a given round. The default runs evaluate_batch on a
// per-round stream.
using PolicyEvaluator =
    std::function<MeanSe(const CloudPolicy&, std::size_t round)>;

// Randomized winner's rule: keep a policy whose run beat U; otherwise flip
// a fair coin between repeating it and changing one parameter slightly.
// `on_round` (optional) sees each record as soon as it is final.
SearchState winner_rule_search(
    const SearchConfig& config, PolicyEvaluator evaluator = {},
    const std::function<void(const SearchRecord&)>& on_round = {});

}  // namespace robbins

#endif  // ROBBINS_CLOUD_SEARCH_HPP_
