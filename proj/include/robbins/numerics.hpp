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

#ifndef ROBBINS_NUMERICS_HPP_
#define ROBBINS_NUMERICS_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace robbins::numerics {

struct Minimum {
  double x = 0.0;
  double value = 0.0;
  // Set when a coarse pre-scan found more than one local minimum and the
  // search was restricted to the bracket around the best grid point.
  bool non_unimodal = false;
};

// Golden-section search on [a, b] down to an interval of width `tol`,
// preceded by a `scan_points` grid scan used to pick the bracket.
Minimum golden_section(const std::function<double(double)>& f, double a,
                       double b, double tol, std::size_t scan_points = 33);

// Composite Gauss-Legendre rule (5 nodes per panel) over [a, b].
double gauss_legendre(const std::function<double(double)>& f, double a,
                      double b, std::size_t panels);

// Kahan-Babuska summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace robbins::numerics

#endif  // ROBBINS_NUMERICS_HPP_
