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

#include "robbins/poisson_ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include "json.hpp"

#include "robbins/errors.hpp"
#include "robbins/numerics.hpp"

namespace robbins {

PoissonInstance sample_poisson(double t, StreamId seed) {
  if (!(t > 0.0)) throw InvalidArgument("sample_poisson: t must be positive");
  Philox4x32 rng(seed);
  std::poisson_distribution<std::uint64_t> count(t);
  const std::uint64_t n = count(rng);
  PoissonInstance inst{t, std::vector<PoissonPoint>(n)};
  for (auto& p : inst.points) {
    p.arrival = rng.uniform() * t;
    p.value = rng.uniform();
  }
  std::sort(inst.points.begin(), inst.points.end(),
            [](const PoissonPoint& a, const PoissonPoint& b) {
              return a.arrival < b.arrival;
            });
  return inst;
}

ContinuousThreshold::ContinuousThreshold(double c, double horizon,
                                         ThresholdForm form)
    : c_(c), horizon_(horizon), form_(form) {
  if (!(c > 1.0)) throw InvalidArgument("ContinuousThreshold: c must exceed 1");
  if (!(horizon > 0.0)) {
    throw InvalidArgument("ContinuousThreshold: horizon must be positive");
  }
  if (form == ThresholdForm::kUnitHorizon && horizon > 1.0) {
    throw InvalidArgument("ContinuousThreshold: unit-horizon form needs t <= 1");
  }
}

double ContinuousThreshold::phi(double s) const {
  if (s > horizon_) return 1.0;
  const double end = form_ == ThresholdForm::kHorizon ? horizon_ : 1.0;
  return c_ / (end - s + c_);
}

double ContinuousThreshold::phi_gap(double s, double u) const {
  if (s > horizon_ || u > horizon_) return phi(s) - phi(u);
  const double end = form_ == ThresholdForm::kHorizon ? horizon_ : 1.0;
  return c_ * (s - u) / ((end - s + c_) * (end - u + c_));
}

double mu_of(const ContinuousThreshold& ct, double s) {
  if (s < 0.0 || s > ct.horizon()) {
    throw InvalidArgument("mu_of: s must lie in [0, horizon]");
  }
  const double end = ct.form() == ThresholdForm::kHorizon ? ct.horizon() : 1.0;
  return ct.c() * std::log((end + ct.c()) / (end - s + ct.c()));
}

Penalty default_penalty() {
  return Penalty{[](double t) { return 0.5 * (t + 1.0 - std::exp(-t)); },
                 "(t+1-exp(-t))/2"};
}

Penalty linear_penalty(double slope) {
  return Penalty{[slope](double t) { return slope * t; },
                 std::to_string(slope) + "*t"};
}

WValue value_W(const ContinuousThreshold& ct, const Penalty& penalty,
               double rel_tol, WIntegrand integrand) {
  using boost::math::quadrature::gauss_kronrod;
  const double t = ct.horizon();
  if (std::abs(penalty(0.0)) > 1e-12) {
    throw InvalidArgument("value_W: penalty must vanish at 0");
  }
  constexpr unsigned kDepth = 15;
  const auto survival = [&](double s) { return std::exp(-mu_of(ct, s)); };
  // Integrals run over [0, 1] and are rescaled by their length: boost's
  // stopping rule compares an unscaled error with a scaled tolerance, so
  // short intervals would otherwise recurse to full depth.
  const auto unit = [&](auto f, double len, double* err) {
    const double v =
        len * gauss_kronrod<double, 31>::integrate([&](double y) { return f(len * y); }, 0.0,
                                                   1.0, kDepth, rel_tol, err);
    *err *= len;
    return v;
  };

  double err_a = 0.0;
  const double part_a = unit(
      [&](double s) {
        const double p = ct.phi(s);
        return p * p * (t - s) * survival(s);
      },
      t, &err_a);

  double worst_inner = 0.0;
  const auto inner = [&](double s) {
    if (s <= 0.0) return 0.0;
    double err = 0.0;
    const double v = unit(
        [&](double u) {
          const double d = ct.phi_gap(s, u);
          if (integrand == WIntegrand::kPoisson) return d * d;
          const double room = 1.0 - ct.phi(u);
          if (!(room > 0.0)) {
            throw NumericalError("value_W: threshold reaches 1 inside the horizon");
          }
          return d * d / room;
        },
        s, &err);
    worst_inner = std::max(worst_inner, err);
    return v;
  };
  double err_b = 0.0;
  const double part_b = unit([&](double s) { return inner(s) * survival(s); }, t, &err_b);

  const double value = 1.0 + (penalty(t) - 1.0) * survival(t) + 0.5 * part_a +
                       0.5 * part_b;
  if (!std::isfinite(value)) throw NumericalError("value_W: divergent quadrature");
  return {value, 0.5 * (err_a + err_b + t * worst_inner)};
}

namespace {

// Index of the first point with value <= phi(arrival), or npos.
std::size_t accepted_point(const ContinuousThreshold& ct,
                           const PoissonInstance& inst) {
  for (std::size_t i = 0; i < inst.points.size(); ++i) {
    if (inst.points[i].value <= ct.phi(inst.points[i].arrival)) return i;
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

MeanSe simulate_threshold_play(const ContinuousThreshold& ct,
                               const Penalty& penalty,
                               std::uint64_t replications, std::uint64_t seed) {
  if (replications == 0) {
    throw InvalidArgument("simulate_threshold_play: replications must be >= 1");
  }
  const double t = ct.horizon();
  const double pi_t = penalty(t);
  std::vector<double> loss(replications);
  parallel_for(replications, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t r = begin; r < end; ++r) {
      const PoissonInstance inst = sample_poisson(t, derive_stream(seed, r));
      const std::size_t i = accepted_point(ct, inst);
      if (i == static_cast<std::size_t>(-1)) {
        loss[r] = pi_t;
        continue;
      }
      const double x = inst.points[i].value;
      std::size_t below = 0;
      for (std::size_t j = 0; j < inst.points.size(); ++j) {
        const double v = inst.points[j].value;
        if (v < x || (v == x && j < i)) ++below;
      }
      loss[r] = 1.0 + static_cast<double>(below);
    }
  });
  return mean_and_se(loss);
}

MeanSe simulate_survival(const ContinuousThreshold& ct, double s,
                         std::uint64_t replications, std::uint64_t seed) {
  if (replications == 0) {
    throw InvalidArgument("simulate_survival: replications must be >= 1");
  }
  std::vector<double> alive(replications);
  parallel_for(replications, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t r = begin; r < end; ++r) {
      const PoissonInstance inst =
          sample_poisson(ct.horizon(), derive_stream(seed, r));
      const std::size_t i = accepted_point(ct, inst);
      alive[r] = (i == static_cast<std::size_t>(-1) ||
                  inst.points[i].arrival > s)
                     ? 1.0
                     : 0.0;
    }
  });
  return mean_and_se(alive);
}

double best_c(double t, const Penalty& penalty, double lo, double hi) {
  const auto objective = [&](double c) {
    return value_W(ContinuousThreshold(c, t), penalty, 1e-8).value;
  };
  return numerics::golden_section(objective, lo, hi, 1e-4, 17).x;
}

std::string ConstantH::describe() const {
  std::ostringstream os;
  os << "constant:" << kappa_;
  return os.str();
}

HTable::HTable(std::vector<double> grid_t, std::vector<double> grid_x,
               std::vector<std::vector<double>> values,
               std::vector<std::vector<double>> std_errors,
               std::vector<std::vector<std::uint64_t>> effective)
    : grid_t_(std::move(grid_t)),
      grid_x_(std::move(grid_x)),
      values_(std::move(values)),
      se_(std::move(std_errors)),
      effective_(std::move(effective)) {
  const auto increasing = [](const std::vector<double>& g) {
    return std::adjacent_find(g.begin(), g.end(), std::greater_equal<>()) ==
           g.end();
  };
  if (grid_t_.empty() || grid_x_.size() < 2 || !increasing(grid_t_) ||
      !increasing(grid_x_)) {
    throw InvalidArgument("HTable: grids must be nonempty and increasing");
  }
  const auto check_shape = [&](const auto& m, const char* what) {
    if (m.size() != grid_t_.size()) {
      throw InvalidArgument(std::string("HTable: bad row count in ") + what);
    }
    for (const auto& row : m) {
      if (row.size() != grid_x_.size()) {
        throw InvalidArgument(std::string("HTable: bad column count in ") + what);
      }
    }
  };
  check_shape(values_, "values");
  if (se_.empty()) {
    se_.assign(grid_t_.size(), std::vector<double>(grid_x_.size(), 0.0));
  }
  check_shape(se_, "std_errors");
  if (!effective_.empty()) check_shape(effective_, "effective");
  for (const auto& row : values_) {
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidArgument("HTable: non-finite value");
    }
  }
}

namespace {

// Bracketing index and weight for linear interpolation, clamped to the grid.
std::pair<std::size_t, double> locate(const std::vector<double>& g, double v) {
  if (v <= g.front()) return {0, 0.0};
  if (v >= g.back()) return {g.size() - 1, 0.0};
  const auto it = std::upper_bound(g.begin(), g.end(), v);
  const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
  return {i, (v - g[i]) / (g[i + 1] - g[i])};
}

}  // namespace

double HTable::operator()(double t, double x) const {
  const auto [i, wt] = locate(grid_t_, t);
  const auto [j, wx] = locate(grid_x_, x);
  const auto at = [&](std::size_t a, std::size_t b) {
    return values_[std::min(a, grid_t_.size() - 1)][std::min(b, grid_x_.size() - 1)];
  };
  const double lo = (1.0 - wx) * at(i, j) + (wx > 0.0 ? wx * at(i, j + 1) : 0.0);
  if (wt == 0.0) return lo;
  const double hi = (1.0 - wx) * at(i + 1, j) + (wx > 0.0 ? wx * at(i + 1, j + 1) : 0.0);
  return (1.0 - wt) * lo + wt * hi;
}

bool HTable::usable(std::size_t i, std::size_t j) const {
  if (effective_.empty()) return true;
  return effective_.at(i).at(j) >= kMinEffective;
}

std::string HTable::to_json() const {
  nlohmann::json doc;
  doc["grid_t"] = grid_t_;
  doc["grid_x"] = grid_x_;
  doc["values"] = values_;
  doc["std_errors"] = se_;
  if (!effective_.empty()) doc["effective"] = effective_;
  return doc.dump();
}

HTable HTable::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    return HTable(doc.at("grid_t").get<std::vector<double>>(),
                  doc.at("grid_x").get<std::vector<double>>(),
                  doc.at("values").get<std::vector<std::vector<double>>>(),
                  doc.value("std_errors", std::vector<std::vector<double>>{}),
                  doc.value("effective",
                            std::vector<std::vector<std::uint64_t>>{}));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("HTable::from_json: ") + e.what());
  }
}

HGridSpec default_h_grid() {
  return HGridSpec{
      {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0},
      {0.0, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.05, 0.1, 0.2,
       0.35, 0.5, 0.75, 1.0}};
}

HTable h_from_simulation(const HGridSpec& grid, std::uint64_t replications,
                         std::uint64_t seed, const Penalty& penalty) {
  if (replications < 2) {
    throw InvalidArgument("h_from_simulation: need at least 2 replications");
  }
  const std::size_t nt = grid.grid_t.size(), nx = grid.grid_x.size();
  std::vector<std::vector<double>> values(nt, std::vector<double>(nx, 0.0));
  std::vector<std::vector<double>> se(nt, std::vector<double>(nx, 0.0));
  std::vector<std::vector<std::uint64_t>> effective(
      nt, std::vector<std::uint64_t>(nx, 0));
  for (std::size_t i = 0; i < nt; ++i) {
    const double t = grid.grid_t[i];
    if (!(t > 0.0)) continue;  // no arrivals, no gap
    const ContinuousThreshold ct(best_c(t, penalty), t);
    // Accepted value per replication; NaN when nothing was accepted.
    std::vector<double> picked(replications);
    const std::uint64_t row_seed = mix64(seed ^ mix64(i + 1));
    parallel_for(replications, [&](std::uint64_t begin, std::uint64_t end) {
      for (std::uint64_t r = begin; r < end; ++r) {
        const PoissonInstance inst = sample_poisson(t, derive_stream(row_seed, r));
        const std::size_t a = accepted_point(ct, inst);
        picked[r] = a == static_cast<std::size_t>(-1)
                        ? std::numeric_limits<double>::quiet_NaN()
                        : inst.points[a].value;
      }
    });
    std::uint64_t stops = 0;
    for (double v : picked) stops += std::isnan(v) ? 0 : 1;
    const double m = static_cast<double>(replications);
    for (std::size_t j = 0; j < nx; ++j) {
      const double x = grid.grid_x[j];
      std::uint64_t hits = 0;
      for (double v : picked) hits += (!std::isnan(v) && v > x) ? 1 : 0;
      const double p = static_cast<double>(hits) / m;
      values[i][j] = p;
      se[i][j] = std::sqrt(p * (1.0 - p) / (m - 1.0));
      effective[i][j] = stops;
    }
  }
  return HTable(grid.grid_t, grid.grid_x, std::move(values), std::move(se),
                std::move(effective));
}

double ode_rhs_integral(const HModel& h, double t, double w) {
  const auto check = [](double v) {
    if (!std::isfinite(v)) throw InvalidArgument("ode: h returned a non-finite value");
    return v;
  };
  const auto nodes = h.linear_x_nodes();
  if (!nodes.empty()) {
    std::vector<double> cuts = {0.0};
    for (double x : nodes) {
      if (x > 0.0 && x < 1.0) cuts.push_back(x);
    }
    cuts.push_back(1.0);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double a = cuts[k], b = cuts[k + 1];
      const double ha = check(h(t, a)), hb = check(h(t, b));
      // min{1 + x t, w + h} = (w + h) + min{g, 0}, g linear on [a, b].
      const double ga = 1.0 + a * t - w - ha;
      const double gb = 1.0 + b * t - w - hb;
      total += (b - a) * (w + 0.5 * (ha + hb));
      if (ga <= 0.0 && gb <= 0.0) {
        total += 0.5 * (ga + gb) * (b - a);
      } else if (ga < 0.0 || gb < 0.0) {
        const double root = a + ga / (ga - gb) * (b - a);
        total += ga < 0.0 ? 0.5 * ga * (root - a) : 0.5 * gb * (b - root);
      }
    }
    return total;
  }
  // General h: locate sign changes of g on a panel grid and split there.
  const auto g = [&](double x) { return 1.0 + x * t - w - check(h(t, x)); };
  const auto f = [&](double x) { return std::min(1.0 + x * t, w + check(h(t, x))); };
  constexpr std::size_t kPanels = 64;
  numerics::CompensatedSum total;
  double a = 0.0, ga = g(0.0);
  for (std::size_t p = 1; p <= kPanels; ++p) {
    const double b = static_cast<double>(p) / kPanels;
    const double gb = g(b);
    if ((ga < 0.0) != (gb < 0.0)) {
      double l = a, r = b, gl = ga;
      for (int it = 0; it < 80 && r - l > 1e-15; ++it) {
        const double m = 0.5 * (l + r);
        const double gm = g(m);
        if ((gm < 0.0) == (gl < 0.0)) {
          l = m;
          gl = gm;
        } else {
          r = m;
        }
      }
      const double root = 0.5 * (l + r);
      total.add(numerics::gauss_legendre(f, a, root, 1));
      total.add(numerics::gauss_legendre(f, root, b, 1));
    } else {
      total.add(numerics::gauss_legendre(f, a, b, 1));
    }
    a = b;
    ga = gb;
  }
  return total.value();
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Fifth minus fourth order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeSolution ode_solve(const OdeProblem& problem) {
  if (!problem.h) throw InvalidArgument("ode_solve: missing h model");
  if (!(problem.t_max > 0.0)) throw InvalidArgument("ode_solve: t_max must be positive");
  if (!(problem.rel_tol > 0.0) || !(problem.abs_tol > 0.0) ||
      !(problem.initial_step > 0.0) || !(problem.output_step > 0.0)) {
    throw InvalidArgument("ode_solve: step controls must be positive");
  }
  const double w0 = problem.penalty(0.0);
  if (std::abs(w0) > 1e-12) throw InvalidArgument("ode_solve: Pi(0) must be 0");

  const HModel& h = *problem.h;
  const auto rhs = [&](double t, double w) {
    return ode_rhs_integral(h, t, w) - w;
  };

  OdeSolution sol;
  double t = 0.0, w = w0;
  double step = std::min(problem.initial_step, problem.t_max);
  double next_output = problem.output_step;
  sol.trajectory.emplace_back(t, w);
  double k1 = rhs(t, w);
  while (t < problem.t_max) {
    const double target = std::min(next_output, problem.t_max);
    step = std::min(step, target - t);
    if (step < 1e-14 * std::max(1.0, t)) {
      throw NumericalError("ode_solve: step size underflow at t = " +
                           std::to_string(t) + " (stiff or discontinuous rhs)");
    }
    const double k2 = rhs(t + c2 * step, w + step * a21 * k1);
    const double k3 = rhs(t + c3 * step, w + step * (a31 * k1 + a32 * k2));
    const double k4 = rhs(t + c4 * step, w + step * (a41 * k1 + a42 * k2 + a43 * k3));
    const double k5 = rhs(t + c5 * step,
                          w + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const double k6 = rhs(t + step, w + step * (a61 * k1 + a62 * k2 + a63 * k3 +
                                                a64 * k4 + a65 * k5));
    const double w_new =
        w + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double k7 = rhs(t + step, w_new);
    const double local_err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 +
                                     e6 * k6 + e7 * k7);
    const double scale =
        problem.abs_tol + problem.rel_tol * std::max(std::abs(w), std::abs(w_new));
    const double ratio = std::abs(local_err) / scale;
    if (!std::isfinite(ratio)) throw NumericalError("ode_solve: non-finite step");
    if (ratio <= 1.0) {
      t += step;
      w = w_new;
      k1 = k7;
      sol.error_estimate += std::abs(local_err);
      ++sol.accepted_steps;
      if (t >= target) {
        sol.trajectory.emplace_back(t, w);
        next_output += problem.output_step;
      }
    } else {
      ++sol.rejected_steps;
    }
    const double factor =
        ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
    step *= factor;
  }

  // Trapezoidal time average over the last 10% of the horizon.
  const double tail_start = 0.9 * problem.t_max;
  double area = 0.0, span = 0.0;
  for (std::size_t i = 1; i < sol.trajectory.size(); ++i) {
    const auto [ta, wa] = sol.trajectory[i - 1];
    const auto [tb, wb] = sol.trajectory[i];
    if (tb <= tail_start) continue;
    const double lo = std::max(ta, tail_start);
    const double w_lo = wa + (wb - wa) * (lo - ta) / (tb - ta);
    area += 0.5 * (w_lo + wb) * (tb - lo);
    span += tb - lo;
  }
  sol.limit_estimate = span > 0.0 ? area / span : w;
  return sol;
}

}  // namespace robbins
