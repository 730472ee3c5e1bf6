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

#ifndef ROBBINS_EXACT_DP_HPP_
#define ROBBINS_EXACT_DP_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace robbins {

// Classical best-choice rule: reject the first cutoff-1 observations, then
// accept the first relative best.
struct SecretaryRule {
  std::size_t n = 0;
  std::size_t cutoff = 1;
  double success_prob = 1.0;
};

// Exact success probability of the cutoff rule:
// ((cutoff-1)/n) * sum_{j=cutoff}^{n} 1/(j-1), and 1/n for cutoff 1.
double secretary_success(std::size_t n, std::size_t cutoff);

// Optimal cutoff by maximizing secretary_success; ties go to the smaller
// cutoff.
SecretaryRule secretary_rule(std::size_t n);

// Variant with the printed sum condition: smallest k with
// sum_{j=k}^{n} 1/j <= 1. Kept for comparison; secretary_rule is the
// optimal one.
SecretaryRule secretary_rule_sum_form(std::size_t n);

enum class ValueMethod { kClosedForm, kQuadrature, kBruteForce };
std::string to_string(ValueMethod m);

struct ExactValue {
  std::size_t n = 0;
  double value = 0.0;
  ValueMethod method = ValueMethod::kClosedForm;
  double error_bound = 0.0;
  std::size_t panels = 0;  // quadrature panels per level at convergence
};

inline constexpr std::size_t kOptimalValueMaxN = 4;

// Optimal (full-history) expected rank v_n for n <= 4 by backward
// induction with nested Gauss-Legendre quadrature. The history-dependent
// state is (n-1)-dimensional, so larger n throws ResourceBound.
ExactValue optimal_value(std::size_t n, double tol = 1e-4);

struct TruncationSpec {
  std::size_t n = 0;
  std::size_t level = 1;
  double value = 1.0;
  // Level 2 only: accept a running minimum x at step k (1-based, k < n) iff
  // x <= thresholds[k-1].
  std::vector<double> thresholds;
};

inline constexpr std::size_t kTruncationMaxLevel = 2;
inline constexpr std::size_t kTruncationMaxN = 50;

// Optimal expected truncated loss E min{level, L}. Storage grows
// exponentially in the level, so only level <= 2 and n <= 50 are served;
// anything else throws ResourceBound.
TruncationSpec truncated_value(std::size_t n, std::size_t level);

}  // namespace robbins

#endif  // ROBBINS_EXACT_DP_HPP_
