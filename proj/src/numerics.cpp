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

#include "robbins/numerics.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace robbins::numerics {

Minimum golden_section(const std::function<double(double)>& f, double a,
                       double b, double tol, std::size_t scan_points) {
  Minimum out;
  scan_points = std::max<std::size_t>(scan_points, 3);
  std::vector<double> xs(scan_points), fs(scan_points);
  for (std::size_t i = 0; i < scan_points; ++i) {
    xs[i] = a + (b - a) * static_cast<double>(i) /
                    static_cast<double>(scan_points - 1);
    fs[i] = f(xs[i]);
  }
  const std::size_t best = static_cast<std::size_t>(
      std::min_element(fs.begin(), fs.end()) - fs.begin());
  std::size_t local_minima = 0;
  for (std::size_t i = 0; i < scan_points; ++i) {
    const bool left_ok = i == 0 || fs[i] < fs[i - 1];
    const bool right_ok = i + 1 == scan_points || fs[i] <= fs[i + 1];
    if (left_ok && right_ok) ++local_minima;
  }
  out.non_unimodal = local_minima > 1;

  double lo = xs[best == 0 ? 0 : best - 1];
  double hi = xs[std::min(best + 1, scan_points - 1)];
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  out.x = f1 <= f2 ? x1 : x2;
  out.value = std::min(f1, f2);
  if (fs[best] < out.value) {
    out.x = xs[best];
    out.value = fs[best];
  }
  return out;
}

double gauss_legendre(const std::function<double(double)>& f, double a,
                      double b, std::size_t panels) {
  static constexpr std::array<double, 5> kNodes = {
      0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
      0.9061798459386640};
  static constexpr std::array<double, 5> kWeights = {
      0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
      0.2369268850561891, 0.2369268850561891};
  if (!(b > a) || panels == 0) return 0.0;
  const double h = (b - a) / static_cast<double>(panels);
  CompensatedSum total;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = a + h * (static_cast<double>(p) + 0.5);
    double s = 0.0;
    for (std::size_t i = 0; i < kNodes.size(); ++i) {
      s += kWeights[i] * f(mid + 0.5 * h * kNodes[i]);
    }
    total.add(0.5 * h * s);
  }
  return total.value();
}

}  // namespace robbins::numerics
