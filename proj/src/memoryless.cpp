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

#include "robbins/memoryless.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robbins/errors.hpp"
#include "robbins/numerics.hpp"

namespace robbins {

ThresholdVector::ThresholdVector(std::vector<double> phi)
    : phi_(std::move(phi)) {
  if (phi_.empty()) throw InvalidArgument("ThresholdVector: empty");
  for (double p : phi_) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw InvalidArgument("ThresholdVector: entries must lie in (0, 1]");
    }
  }
  if (phi_.back() != 1.0) {
    throw InvalidArgument("ThresholdVector: last threshold must be 1");
  }
}

ThresholdVector phi_family(double c, std::size_t n) {
  if (!(c > 1.0)) throw InvalidArgument("phi_family: c must exceed 1");
  if (n == 0) throw InvalidArgument("phi_family: n must be >= 1");
  std::vector<double> phi(n);
  for (std::size_t j = 1; j <= n; ++j) {
    phi[j - 1] = c / (static_cast<double>(n - j) + c);
  }
  phi.back() = 1.0;
  return ThresholdVector(std::move(phi));
}

// Accepting X_j = x after passing X_l > phi_l (l < j): the passed values
// are uniform on (phi_l, 1], so the expected number of them below x is
// (x - phi_l)^+ / (1 - phi_l); later values contribute (n - j) x.
// Integrating over x in [0, phi_j] gives
//   phi_j + sum_l ((phi_j - phi_l)^+)^2 / (2 (1 - phi_l)) + (n - j) phi_j^2 / 2
// weighted by P(reach j) = prod_l (1 - phi_l).
double expected_rank_exact(const ThresholdVector& tv) {
  const std::size_t n = tv.n();
  const auto phi = tv.values();
  numerics::CompensatedSum total;
  long double a = 0, b = 0, c = 0;  // prefix sums of 1, phi, phi^2 over 1-phi
  double running_max = 0.0;
  double log_reach = 0.0;  // log prod (1 - phi_l)
  for (std::size_t j = 0; j < n; ++j) {
    const double p = phi[j];
    long double cloud;
    if (running_max <= p) {
      cloud = p * p * a - 2 * p * b + c;
      if (cloud < 0) cloud = 0;
    } else {
      cloud = 0;
      for (std::size_t l = 0; l < j; ++l) {
        const double d = p - phi[l];
        if (d > 0) cloud += static_cast<long double>(d) * d / (1.0L - phi[l]);
      }
    }
    const double reach = std::exp(log_reach);
    const double term =
        p + 0.5 * static_cast<double>(cloud) +
        0.5 * static_cast<double>(n - 1 - j) * p * p;
    total.add(reach * term);
    if (p >= 1.0) break;  // nothing after a certain acceptance
    const long double w = 1.0L / (1.0L - p);
    a += w;
    b += p * w;
    c += static_cast<long double>(p) * p * w;
    running_max = std::max(running_max, p);
    log_reach += std::log1p(-p);
    if (log_reach < std::log(std::numeric_limits<double>::min())) break;
  }
  return total.value();
}

Decision ThresholdPolicy::decide(std::size_t k, double x,
                                 std::span<const double> /*history*/,
                                 std::size_t /*n*/) const {
  return x <= tv_[k - 1] ? Decision::kAccept : Decision::kPass;
}

FamilyOptimum optimize_c(std::size_t n, double lo, double hi, double tol) {
  if (n == 0) throw InvalidArgument("optimize_c: n must be >= 1");
  if (!(lo > 1.0) || !(hi > lo)) {
    throw InvalidArgument("optimize_c: search interval must lie in (1, inf)");
  }
  const auto objective = [n](double c) {
    return expected_rank_exact(phi_family(c, n));
  };
  const numerics::Minimum m = numerics::golden_section(objective, lo, hi, tol);
  return FamilyOptimum{m.x, m.value, tol, m.non_unimodal};
}

FreeOptimum optimize_free(std::size_t n, double value_tol,
                          std::size_t max_sweeps) {
  if (n == 0) throw InvalidArgument("optimize_free: n must be >= 1");
  if (n > kFreeOptimizationMaxN) {
    throw ResourceBound("optimize_free: n exceeds the coordinate-descent cap of " +
                        std::to_string(kFreeOptimizationMaxN));
  }
  if (n == 1) return FreeOptimum{ThresholdVector({1.0}), 1.0, 0, true};

  // Start from the best one-parameter family member.
  const FamilyOptimum start = optimize_c(n, 1.0 + 1e-9, 4.0, 1e-6);
  const ThresholdVector seed_vector = phi_family(start.c_star, n);
  std::vector<double> phi(seed_vector.values().begin(),
                          seed_vector.values().end());
  double value = expected_rank_exact(ThresholdVector(phi));
  constexpr double kFloor = 1e-12;

  FreeOptimum out{ThresholdVector(phi), value, 0, false};
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    const double before = value;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const auto objective = [&](double p) {
        std::vector<double> trial = phi;
        trial[j] = std::clamp(p, kFloor, 1.0);
        return expected_rank_exact(ThresholdVector(std::move(trial)));
      };
      const numerics::Minimum m =
          numerics::golden_section(objective, kFloor, 1.0, 1e-12, 9);
      if (m.value < value) {
        phi[j] = std::clamp(m.x, kFloor, 1.0);
        value = m.value;
      }
    }
    out.sweeps = sweep;
    if (before - value < value_tol) {
      out.converged = true;
      break;
    }
  }
  out.phi = ThresholdVector(phi);
  out.value = value;
  return out;
}

}  // namespace robbins
