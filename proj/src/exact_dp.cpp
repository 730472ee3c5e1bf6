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

#include "robbins/exact_dp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "robbins/errors.hpp"
#include "robbins/numerics.hpp"

namespace robbins {

double secretary_success(std::size_t n, std::size_t cutoff) {
  if (n == 0 || cutoff < 1 || cutoff > n) {
    throw InvalidArgument("secretary_success: need 1 <= cutoff <= n");
  }
  if (cutoff == 1) return 1.0 / static_cast<double>(n);
  numerics::CompensatedSum s;
  for (std::size_t j = n; j >= cutoff; --j) s.add(1.0 / static_cast<double>(j - 1));
  return static_cast<double>(cutoff - 1) / static_cast<double>(n) * s.value();
}

SecretaryRule secretary_rule(std::size_t n) {
  if (n == 0) throw InvalidArgument("secretary_rule: n must be >= 1");
  // Suffix sums of 1/(j-1), accumulated from the top.
  SecretaryRule best{n, 1, 1.0 / static_cast<double>(n)};
  numerics::CompensatedSum tail;
  for (std::size_t r = n; r >= 2; --r) {
    tail.add(1.0 / static_cast<double>(r - 1));
    const double p =
        static_cast<double>(r - 1) / static_cast<double>(n) * tail.value();
    if (p >= best.success_prob) best = {n, r, p};
  }
  return best;
}

SecretaryRule secretary_rule_sum_form(std::size_t n) {
  if (n == 0) throw InvalidArgument("secretary_rule_sum_form: n must be >= 1");
  numerics::CompensatedSum tail;
  std::size_t cutoff = n;
  for (std::size_t k = n; k >= 1; --k) {
    tail.add(1.0 / static_cast<double>(k));
    if (tail.value() > 1.0) break;
    cutoff = k;
  }
  return {n, cutoff, secretary_success(n, cutoff)};
}

std::string to_string(ValueMethod m) {
  switch (m) {
    case ValueMethod::kClosedForm: return "closed-form";
    case ValueMethod::kQuadrature: return "quadrature";
    case ValueMethod::kBruteForce: return "brute-force";
  }
  return "unknown";
}

namespace {

// Backward induction over the full value history.
//
// After passing observation k with earlier values `prior` (sorted, size k),
// the continuation value is
//   C_k(prior) = int_0^1 min(S_{k+1}(prior, x), C_{k+1}(prior + x)) dx
// where S_k(prior, x) = 1 + #{prior < x} + (n - k) x is the expected final
// rank of stopping on x at step k. C_{n-1}(prior) = 1 + sum (1 - y) because
// the last observation is forced.
class HistoryDp {
 public:
  HistoryDp(std::size_t n, std::size_t panels) : n_(n), panels_(panels) {}

  double value() const {
    std::vector<double> none;
    return integrate_level(0, none);
  }

 private:
  double stop(std::size_t k, const std::vector<double>& prior, double x) const {
    const auto below = static_cast<double>(
        std::lower_bound(prior.begin(), prior.end(), x) - prior.begin());
    return 1.0 + below + static_cast<double>(n_ - k) * x;
  }

  double continuation(std::size_t k, const std::vector<double>& prior) const {
    if (k == n_ - 1) {
      double s = 1.0;
      for (double y : prior) s += 1.0 - y;
      return s;
    }
    return integrate_level(k, prior);
  }

  static std::vector<double> with(const std::vector<double>& prior, double x) {
    std::vector<double> out(prior);
    out.insert(std::upper_bound(out.begin(), out.end(), x), x);
    return out;
  }

  // int_0^1 min(S_{k+1}(prior, x), C_{k+1}(prior + x)) dx, the (k+1)-th
  // observation being forced when k + 1 == n.
  double integrate_level(std::size_t k, const std::vector<double>& prior) const {
    std::vector<double> cuts = {0.0};
    for (double y : prior) cuts.push_back(y);
    cuts.push_back(1.0);
    if (k + 1 == n_) {
      // Forced: E rank = 1 + sum_y (1 - y).
      double s = 1.0;
      for (double y : prior) s += 1.0 - y;
      return s;
    }
    if (k + 2 == n_) return integrate_linear(k, prior, cuts);
    return integrate_numeric(k, prior, cuts);
  }

  // Both branches are linear in x between consecutive prior values.
  double integrate_linear(std::size_t k, const std::vector<double>& prior,
                          const std::vector<double>& cuts) const {
    double base = 1.0;
    for (double y : prior) base += 1.0 - y;
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double lo = cuts[s], hi = cuts[s + 1];
      if (!(hi > lo)) continue;
      // stop(x) = 1 + s + x, cont(x) = base + 1 - x on this segment.
      const double stop_a = 1.0 + static_cast<double>(s);
      const double stop_b = static_cast<double>(n_ - k - 1);
      const double cont_a = base + 1.0, cont_b = -1.0;
      const auto seg = [&](double a, double b, double ca, double cb) {
        return ca * (b - a) + 0.5 * cb * (b * b - a * a);
      };
      const double da = stop_a - cont_a, db = stop_b - cont_b;
      double root = db != 0.0 ? -da / db : lo - 1.0;
      if (root > lo && root < hi) {
        const bool stop_left = da + db * 0.5 * (lo + root) < 0.0;
        total += stop_left ? seg(lo, root, stop_a, stop_b)
                           : seg(lo, root, cont_a, cont_b);
        total += stop_left ? seg(root, hi, cont_a, cont_b)
                           : seg(root, hi, stop_a, stop_b);
      } else {
        const double mid = 0.5 * (lo + hi);
        const bool stop_wins = da + db * mid < 0.0;
        total += stop_wins ? seg(lo, hi, stop_a, stop_b)
                           : seg(lo, hi, cont_a, cont_b);
      }
    }
    return total;
  }

  // Composite Gauss-Legendre over panels; each panel whose endpoints see a
  // sign change of stop - cont is split at the bisected crossing.
  double integrate_numeric(std::size_t k, const std::vector<double>& prior,
                           const std::vector<double>& cuts) const {
    const auto stop_x = [&](double x) { return stop(k + 1, prior, x); };
    const auto cont_x = [&](double x) { return continuation(k + 1, with(prior, x)); };
    const auto gap = [&](double x) { return stop_x(x) - cont_x(x); };
    const auto best = [&](double x) { return std::min(stop_x(x), cont_x(x)); };
    numerics::CompensatedSum total;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double lo = cuts[s], hi = cuts[s + 1];
      if (!(hi > lo)) continue;
      const auto count = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil((hi - lo) * static_cast<double>(panels_))));
      const double h = (hi - lo) / static_cast<double>(count);
      // Stay strictly inside the segment: the stop branch jumps at its ends.
      const double eps = 1e-12 * (hi - lo);
      double a = lo;
      double ga = gap(lo + eps);
      for (std::size_t p = 1; p <= count; ++p) {
        const double b = p == count ? hi : lo + h * static_cast<double>(p);
        const double gb = gap(b - (p == count ? eps : 0.0));
        if ((ga < 0.0) != (gb < 0.0)) {
          double l = a, r = b, gl = ga;
          for (int it = 0; it < 100 && r - l > 1e-15; ++it) {
            const double m = 0.5 * (l + r);
            const double gm = gap(m);
            if ((gm < 0.0) == (gl < 0.0)) {
              l = m;
              gl = gm;
            } else {
              r = m;
            }
          }
          const double root = 0.5 * (l + r);
          total.add(numerics::gauss_legendre(best, a, root, 1));
          total.add(numerics::gauss_legendre(best, root, b, 1));
        } else {
          total.add(numerics::gauss_legendre(best, a, b, 1));
        }
        a = b;
        ga = gb;
      }
    }
    return total.value();
  }

  std::size_t n_;
  std::size_t panels_;
};

}  // namespace

ExactValue optimal_value(std::size_t n, double tol) {
  if (n == 0) throw InvalidArgument("optimal_value: n must be >= 1");
  if (n > kOptimalValueMaxN) {
    throw ResourceBound(
        "optimal_value: n = " + std::to_string(n) +
        " exceeds the supported maximum of 4; the optimal rule depends on the "
        "full value history, an (n-1)-dimensional state");
  }
  if (n == 1) return {1, 1.0, ValueMethod::kClosedForm, 0.0, 0};
  if (n == 2) {
    return {2, HistoryDp(2, 1).value(), ValueMethod::kClosedForm, 0.0, 0};
  }
  constexpr std::size_t kMaxPanels = 4096;
  std::size_t panels = 8;
  double previous = HistoryDp(n, panels).value();
  for (panels *= 2; panels <= kMaxPanels; panels *= 2) {
    const double current = HistoryDp(n, panels).value();
    const double diff = std::abs(current - previous);
    if (diff < tol) {
      return {n, current, ValueMethod::kQuadrature, diff, panels};
    }
    previous = current;
  }
  throw NumericalError("optimal_value: quadrature did not converge");
}

TruncationSpec truncated_value(std::size_t n, std::size_t level) {
  if (n == 0) throw InvalidArgument("truncated_value: n must be >= 1");
  if (level < 1 || level > n) {
    throw InvalidArgument("truncated_value: need 1 <= level <= n");
  }
  if (level == 1) return {n, 1, 1.0, {}};
  if (level > kTruncationMaxLevel || n > kTruncationMaxN) {
    throw ResourceBound(
        "truncated_value: (n, level) outside the supported envelope "
        "level <= 2, n <= 50; state storage grows exponentially in the level");
  }
  // Loss min{2, L} = 2 - 1{L = 1}, so minimizing it means maximizing the
  // probability of stopping on the overall minimum with full information.
  // W_k(y): win probability after passing observation k with running
  // minimum y. W_{n-1}(y) = y (the forced last value wins iff below y), and
  //   W_k(y) = int_0^y max((1-x)^{n-k-1}, W_{k+1}(x)) dx + (1-y) W_{k+1}(y).
  constexpr std::size_t kGrid = 1 << 15;
  const double h = 1.0 / static_cast<double>(kGrid);
  std::vector<double> grid(kGrid + 1);
  for (std::size_t i = 0; i <= kGrid; ++i) grid[i] = h * static_cast<double>(i);

  std::vector<std::vector<double>> w(n);  // w[k] for k = 1..n-1
  w[n - 1] = grid;
  const auto stop_win = [](double x, std::size_t remaining) {
    return std::pow(1.0 - x, static_cast<double>(remaining));
  };
  for (std::size_t k = n - 2; k >= 1; --k) {
    const auto& next = w[k + 1];
    std::vector<double> cur(kGrid + 1);
    double integral = 0.0;
    double f_prev = std::max(stop_win(0.0, n - k - 1), next[0]);
    cur[0] = next[0];
    for (std::size_t i = 1; i <= kGrid; ++i) {
      const double f = std::max(stop_win(grid[i], n - k - 1), next[i]);
      integral += 0.5 * h * (f + f_prev);
      f_prev = f;
      cur[i] = integral + (1.0 - grid[i]) * next[i];
    }
    w[k] = std::move(cur);
  }
  double win = 0.0;
  {
    double f_prev = std::max(stop_win(0.0, n - 1), w[1][0]);
    for (std::size_t i = 1; i <= kGrid; ++i) {
      const double f = std::max(stop_win(grid[i], n - 1), w[1][i]);
      win += 0.5 * h * (f + f_prev);
      f_prev = f;
    }
  }
  TruncationSpec spec{n, 2, 2.0 - win, {}};
  // Stopping set at step k is {x : (1-x)^{n-k} >= W_k(x)}, an interval [0, b_k].
  for (std::size_t k = 1; k < n; ++k) {
    const auto& wk = w[k];
    double b = 1.0;
    for (std::size_t i = 1; i <= kGrid; ++i) {
      const double g1 = stop_win(grid[i], n - k) - wk[i];
      if (g1 < 0.0) {
        const double g0 = stop_win(grid[i - 1], n - k) - wk[i - 1];
        b = grid[i - 1] + h * g0 / (g0 - g1);
        break;
      }
    }
    spec.thresholds.push_back(b);
  }
  return spec;
}

}  // namespace robbins
