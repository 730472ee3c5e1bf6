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

#ifndef ROBBINS_MEMORYLESS_HPP_
#define ROBBINS_MEMORYLESS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "robbins/core.hpp"

namespace robbins {

// Memoryless threshold rule: accept the first X_j <= phi[j]. The last
// entry is always 1 so exactly one observation is accepted.
class ThresholdVector {
 public:
  // Throws InvalidArgument unless every entry is in (0, 1] and the last is 1.
  explicit ThresholdVector(std::vector<double> phi);

  std::size_t n() const { return phi_.size(); }
  double operator[](std::size_t j) const { return phi_[j]; }
  std::span<const double> values() const { return phi_; }

 private:
  std::vector<double> phi_;
};

// phi_j = c / (n - j + c); j = n gives 1.
ThresholdVector phi_family(double c, std::size_t n);

// Exact expected final rank under i.i.d. uniform observations.
double expected_rank_exact(const ThresholdVector& tv);

// StrategyPolicy adapter for a threshold vector.
class ThresholdPolicy final : public StrategyPolicy {
 public:
  explicit ThresholdPolicy(ThresholdVector tv) : tv_(std::move(tv)) {}
  Decision decide(std::size_t k, double x, std::span<const double> history,
                  std::size_t n) const override;
  bool memoryless() const override { return true; }
  const ThresholdVector& thresholds() const { return tv_; }

 private:
  ThresholdVector tv_;
};

struct FamilyOptimum {
  double c_star = 0.0;
  double value = 0.0;
  double tolerance = 0.0;
  bool non_unimodal = false;  // diagnostic from the bracketing pre-scan
};

// Minimizes expected_rank_exact(phi_family(c, n)) over c in [lo, hi].
FamilyOptimum optimize_c(std::size_t n, double lo = 1.0 + 1e-9,
                         double hi = 4.0, double tol = 1e-5);

struct FreeOptimum {
  ThresholdVector phi;
  double value = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
};

inline constexpr std::size_t kFreeOptimizationMaxN = 20;

// Cyclic coordinate descent over phi_1..phi_{n-1}. n is capped at
// kFreeOptimizationMaxN; larger n throws ResourceBound.
FreeOptimum optimize_free(std::size_t n, double value_tol = 1e-10,
                          std::size_t max_sweeps = 2000);

}  // namespace robbins

#endif  // ROBBINS_MEMORYLESS_HPP_
