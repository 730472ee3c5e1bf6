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

#ifndef ROBBINS_POISSON_ODE_HPP_
#define ROBBINS_POISSON_ODE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "robbins/core.hpp"
#include "robbins/rng.hpp"

namespace robbins {

// Rate-1 planar Poisson process on [0, t] x [0, 1], sorted by arrival.
struct PoissonPoint {
  double arrival = 0.0;
  double value = 0.0;
};

struct PoissonInstance {
  double horizon = 0.0;
  std::vector<PoissonPoint> points;
};

PoissonInstance sample_poisson(double t, StreamId seed);

enum class ThresholdForm {
  // phi(s) = c / (t - s + c): the finite-n family with n replaced by the
  // horizon. Default.
  kHorizon,
  // phi(s) = c / (1 - s + c), the unit-horizon reading; requires t <= 1.
  kUnitHorizon,
};

// Time-dependent acceptance threshold on [0, t].
class ContinuousThreshold {
 public:
  ContinuousThreshold(double c, double horizon,
                      ThresholdForm form = ThresholdForm::kHorizon);
  double c() const { return c_; }
  double horizon() const { return horizon_; }
  ThresholdForm form() const { return form_; }
  double phi(double s) const;
  // phi(s) - phi(u) without cancellation.
  double phi_gap(double s, double u) const;

 private:
  double c_;
  double horizon_;
  ThresholdForm form_;
};

// mu(s) = int_0^s phi(u) du in closed form; P(no acceptance by s) = e^{-mu}.
double mu_of(const ContinuousThreshold& ct, double s);

// Loss charged when nothing is accepted by the horizon. Must satisfy
// Pi(0) = 0 and be Lipschitz.
struct Penalty {
  std::function<double(double)> fn;
  std::string name;
  double operator()(double t) const { return fn(t); }
};

// (t + 1 - e^{-t}) / 2: expected rank of a uniformly random pick among the
// N(t) arrivals, 0 when there are none.
Penalty default_penalty();
Penalty linear_penalty(double slope);

enum class WIntegrand {
  // Earlier passed points below the accepted value form a Poisson count
  // with mean int_0^s (x - phi(u))^+ du. Matches simulation.
  kPoisson,
  // Divides the inner integrand by 1 - phi(u) as in the discrete-time
  // conditioning. Kept for comparison; disagrees with simulation.
  kConditioned,
};

struct WValue {
  double value = 0.0;
  double error_estimate = 0.0;
};

// W_tau(t) = 1 + (Pi(t) - 1) e^{-mu(t)} + 1/2 int_0^t phi(s)^2 (t-s) e^{-mu(s)} ds
//          + 1/2 int_0^t [int_0^s (phi(s)-phi(u))^2 du] e^{-mu(s)} ds
// by nested adaptive Gauss-Kronrod quadrature.
WValue value_W(const ContinuousThreshold& ct, const Penalty& penalty,
               double rel_tol = 1e-10,
               WIntegrand integrand = WIntegrand::kPoisson);

// Monte Carlo of threshold play: accept the first point with value <=
// phi(arrival); loss is its rank among all points, or Pi(t) if none.
MeanSe simulate_threshold_play(const ContinuousThreshold& ct,
                               const Penalty& penalty,
                               std::uint64_t replications, std::uint64_t seed);

// Fraction of replications with no acceptance by time s.
MeanSe simulate_survival(const ContinuousThreshold& ct, double s,
                         std::uint64_t replications, std::uint64_t seed);

// The c minimizing value_W at horizon t (golden section on [lo, hi]).
double best_c(double t, const Penalty& penalty, double lo = 1.05,
              double hi = 4.0);

// Conditional value gap h(t, x) = w(t|x) - w(t) driving the ODE.
class HModel {
 public:
  virtual ~HModel() = default;
  virtual double operator()(double t, double x) const = 0;
  // Nodes in x between which h(t, .) is linear for every t, or empty when
  // no such structure is known.
  virtual std::span<const double> linear_x_nodes() const { return {}; }
  virtual std::string describe() const = 0;
};

class ZeroH final : public HModel {
 public:
  double operator()(double, double) const override { return 0.0; }
  std::span<const double> linear_x_nodes() const override { return nodes_; }
  std::string describe() const override { return "zero"; }

 private:
  std::vector<double> nodes_ = {0.0, 1.0};
};

class ConstantH final : public HModel {
 public:
  explicit ConstantH(double kappa) : kappa_(kappa) {}
  double operator()(double, double) const override { return kappa_; }
  std::span<const double> linear_x_nodes() const override { return nodes_; }
  std::string describe() const override;

 private:
  double kappa_;
  std::vector<double> nodes_ = {0.0, 1.0};
};

class FunctionH final : public HModel {
 public:
  explicit FunctionH(std::function<double(double, double)> fn,
                     std::string name = "function")
      : fn_(std::move(fn)), name_(std::move(name)) {}
  double operator()(double t, double x) const override { return fn_(t, x); }
  std::string describe() const override { return name_; }

 private:
  std::function<double(double, double)> fn_;
  std::string name_;
};

// Tabulated h on a rectangular (t, x) grid with bilinear interpolation.
// Beyond the last t the last row is held.
class HTable final : public HModel {
 public:
  HTable(std::vector<double> grid_t, std::vector<double> grid_x,
         std::vector<std::vector<double>> values,
         std::vector<std::vector<double>> std_errors,
         std::vector<std::vector<std::uint64_t>> effective = {});

  double operator()(double t, double x) const override;
  std::span<const double> linear_x_nodes() const override { return grid_x_; }
  std::string describe() const override { return "table"; }

  const std::vector<double>& grid_t() const { return grid_t_; }
  const std::vector<double>& grid_x() const { return grid_x_; }
  const std::vector<std::vector<double>>& values() const { return values_; }
  const std::vector<std::vector<double>>& std_errors() const { return se_; }
  // Cells with fewer than kMinEffective informative replications.
  bool usable(std::size_t i, std::size_t j) const;

  // JSON document {grid_t, grid_x, values, std_errors[, effective]}.
  std::string to_json() const;
  static HTable from_json(const std::string& text);

  static constexpr std::uint64_t kMinEffective = 100;

 private:
  std::vector<double> grid_t_;
  std::vector<double> grid_x_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> se_;
  std::vector<std::vector<std::uint64_t>> effective_;
};

struct HGridSpec {
  std::vector<double> grid_t;
  std::vector<double> grid_x;
};

// Default grid: t from 0 to 1000 and x refined near 0, where h lives for
// large t.
HGridSpec default_h_grid();

// Estimates h(t, x) as the rank inflation caused by a phantom value x
// planted at time 0: under best-c threshold play it adds one to the loss
// exactly when the accepted value exceeds x. All x of a row share the
// same instances.
HTable h_from_simulation(const HGridSpec& grid, std::uint64_t replications,
                         std::uint64_t seed, const Penalty& penalty = default_penalty());

struct OdeProblem {
  std::shared_ptr<const HModel> h;
  Penalty penalty = default_penalty();
  double t_max = 1000.0;
  double initial_step = 1e-3;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  // Spacing of the dense output trajectory.
  double output_step = 1.0;
};

struct OdeSolution {
  std::vector<std::pair<double, double>> trajectory;
  // Time average of w over the last 10% of [0, t_max].
  double limit_estimate = 0.0;
  // Sum of accepted local error estimates.
  double error_estimate = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

// Right-hand side integral int_0^1 min{1 + x t, w + h(t, x)} dx.
double ode_rhs_integral(const HModel& h, double t, double w);

// Integrates w'(t) + w(t) = int_0^1 min{1 + x t, w(t) + h(t, x)} dx from
// w(0) = Pi(0) = 0 with an adaptive Dormand-Prince 5(4) pair.
OdeSolution ode_solve(const OdeProblem& problem);

}  // namespace robbins

#endif  // ROBBINS_POISSON_ODE_HPP_
