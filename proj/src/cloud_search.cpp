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

#include "robbins/cloud_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robbins/errors.hpp"

namespace robbins {
namespace {

double baseline_threshold(double c, std::size_t k, std::size_t n) {
  if (k >= n) return 1.0;
  return c / (static_cast<double>(n - k) + c);
}

struct Counts {
  int pre = 0;
  int post = 0;
};

// Earlier values in [x - d, x) and (x, x + p], windows clipped to [0, 1].
Counts count_clouds(std::span<const double> history, double x, double d,
                    double p) {
  const double lo = std::max(0.0, x - d);
  const double hi = std::min(1.0, x + p);
  Counts c;
  for (double h : history) {
    if (d > 0.0 && h >= lo && h < x) ++c.pre;
    if (p > 0.0 && h > x && h <= hi) ++c.post;
  }
  return c;
}

bool dissuasion_active(const CloudPolicy& p) { return p.d_pc > 0.0; }
bool persuasion_active(const CloudPolicy& p) {
  return p.p_pc > 0.0 && p.accept_margin > 0.0;
}

}  // namespace

void validate(const CloudPolicy& p) {
  if (!(p.base_c > 1.0)) throw InvalidArgument("CloudPolicy: base_c must exceed 1");
  if (p.d_pc < 0.0 || p.p_pc < 0.0 || p.accept_margin < 0.0) {
    throw InvalidArgument("CloudPolicy: widths and margins must be >= 0");
  }
  if (p.theta_pre < 0 || p.theta_post < 0) {
    throw InvalidArgument("CloudPolicy: count thresholds must be >= 0");
  }
}

CloudOutcome cloud_explain(const CloudPolicy& policy, std::size_t k, double x,
                           std::span<const double> history, std::size_t n) {
  if (k >= n) return CloudOutcome::kForced;
  const double phi = baseline_threshold(policy.base_c, k, n);
  const bool diff_rule = policy.rule == CloudRule::kLeftRightDifference;
  if (x <= phi) {
    if (!dissuasion_active(policy)) return CloudOutcome::kBaseline;
    const Counts c = count_clouds(history, x, policy.d_pc,
                                  diff_rule ? policy.p_pc : 0.0);
    const bool dissuaded = diff_rule ? c.pre - c.post >= policy.delta_threshold
                                     : c.pre >= policy.theta_pre;
    return dissuaded ? CloudOutcome::kDissuaded : CloudOutcome::kBaseline;
  }
  if (!persuasion_active(policy) || x > phi + policy.accept_margin) {
    return CloudOutcome::kBaseline;
  }
  const Counts c = count_clouds(history, x, diff_rule ? policy.d_pc : 0.0,
                                policy.p_pc);
  const bool persuaded = diff_rule ? c.post - c.pre >= policy.delta_threshold
                                   : c.post >= policy.theta_post;
  return persuaded ? CloudOutcome::kPersuaded : CloudOutcome::kBaseline;
}

Decision cloud_decide(const CloudPolicy& policy, std::size_t k, double x,
                      std::span<const double> history, std::size_t n) {
  switch (cloud_explain(policy, k, x, history, n)) {
    case CloudOutcome::kForced:
    case CloudOutcome::kPersuaded:
      return Decision::kAccept;
    case CloudOutcome::kDissuaded:
      return Decision::kPass;
    case CloudOutcome::kBaseline:
      break;
  }
  return x <= baseline_threshold(policy.base_c, k, n) ? Decision::kAccept
                                                      : Decision::kPass;
}

CloudStrategy::CloudStrategy(CloudPolicy policy) : policy_(policy) {
  validate(policy_);
}

bool CloudStrategy::memoryless() const {
  return !dissuasion_active(policy_) && !persuasion_active(policy_);
}

MeanSe evaluate_batch(const CloudPolicy& policy, std::size_t n,
                      std::uint64_t batch, std::uint64_t seed) {
  const EvalReport r = evaluate_policy(CloudStrategy(policy), n, batch, seed);
  return {r.mean_rank, r.std_error};
}

std::string to_string(RoundAction a) {
  switch (a) {
    case RoundAction::kKept: return "kept";
    case RoundAction::kRepeated: return "repeated";
    case RoundAction::kPerturbed: return "perturbed";
  }
  return "unknown";
}

namespace {

enum class Param { kBaseC, kDpc, kThetaPre, kPpc, kThetaPost, kMargin };

bool in_bounds(const CloudPolicy& p, const SearchBounds& b) {
  return p.base_c >= b.base_c_min && p.base_c <= b.base_c_max &&
         p.d_pc >= 0.0 && p.d_pc <= b.width_max && p.p_pc >= 0.0 &&
         p.p_pc <= b.width_max && p.accept_margin >= 0.0 &&
         p.accept_margin <= b.width_max && p.theta_pre >= 0 &&
         p.theta_pre <= b.count_max && p.theta_post >= 0 &&
         p.theta_post <= b.count_max;
}

double step_width(double w, double scale, bool up) {
  if (w == 0.0) return up ? scale : -1.0;  // -1 is rejected by the bounds
  return up ? w * (1.0 + scale) : w / (1.0 + scale);
}

std::optional<CloudPolicy> perturb(const CloudPolicy& current,
                                   const PerturbationScales& s,
                                   const SearchBounds& bounds,
                                   Philox4x32& rng) {
  std::vector<Param> movable;
  if (s.base_c != 0.0) movable.push_back(Param::kBaseC);
  if (s.d_pc != 0.0) movable.push_back(Param::kDpc);
  if (s.theta_pre != 0) movable.push_back(Param::kThetaPre);
  if (s.p_pc != 0.0) movable.push_back(Param::kPpc);
  if (s.theta_post != 0) movable.push_back(Param::kThetaPost);
  if (s.accept_margin != 0.0) movable.push_back(Param::kMargin);
  if (movable.empty()) return std::nullopt;
  constexpr int kMaxRedraws = 64;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const auto pick = static_cast<std::size_t>(
        rng.uniform() * static_cast<double>(movable.size()));
    const bool up = rng.uniform() < 0.5;
    const int sign = up ? 1 : -1;
    CloudPolicy next = current;
    switch (movable[std::min(pick, movable.size() - 1)]) {
      case Param::kBaseC: next.base_c += sign * s.base_c; break;
      case Param::kDpc: next.d_pc = step_width(next.d_pc, s.d_pc, up); break;
      case Param::kThetaPre: next.theta_pre += sign * s.theta_pre; break;
      case Param::kPpc: next.p_pc = step_width(next.p_pc, s.p_pc, up); break;
      case Param::kThetaPost: next.theta_post += sign * s.theta_post; break;
      case Param::kMargin:
        next.accept_margin = step_width(next.accept_margin, s.accept_margin, up);
        break;
    }
    if (in_bounds(next, bounds) && !(next == current)) return next;
  }
  return std::nullopt;
}

}  // namespace

SearchState winner_rule_search(
    const SearchConfig& config, PolicyEvaluator evaluator,
    const std::function<void(const SearchRecord&)>& on_round) {
  if (config.rounds == 0) throw InvalidArgument("winner_rule_search: rounds must be >= 1");
  if (config.batch == 0) throw InvalidArgument("winner_rule_search: batch must be >= 1");
  validate(config.start);
  if (!evaluator) {
    evaluator = [&config](const CloudPolicy& p, std::size_t round) {
      const std::uint64_t round_seed = mix64(config.seed ^ mix64(round + 1));
      return evaluate_batch(p, config.n, config.single_run ? 1 : config.batch,
                            round_seed);
    };
  }
  Philox4x32 rng(StreamId{mix64(config.seed), 0x5EA7C4});
  SearchState state;
  state.current = config.start;
  state.best = config.start;
  state.best_value = std::numeric_limits<double>::infinity();
  state.baseline_u = config.reference_u;
  state.history.reserve(config.rounds);

  for (std::size_t round = 0; round < config.rounds; ++round) {
    const MeanSe score = evaluator(state.current, round);
    SearchRecord rec{round, state.current, score.mean, score.se,
                     RoundAction::kKept};
    if (score.mean < state.best_value) {
      state.best_value = score.mean;
      state.best = state.current;
    }
    CloudPolicy next = state.current;
    if (score.mean >= config.reference_u) {
      if (rng.uniform() < 0.5) {
        rec.action = RoundAction::kRepeated;
      } else if (auto moved = perturb(state.current, config.scales,
                                      config.bounds, rng)) {
        rec.action = RoundAction::kPerturbed;
        next = *moved;
      } else {
        rec.action = RoundAction::kRepeated;
      }
    }
    state.history.push_back(rec);
    if (on_round) on_round(rec);
    state.current = next;
  }
  return state;
}

}  // namespace robbins
