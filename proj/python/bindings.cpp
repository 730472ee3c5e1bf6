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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "robbins/cloud_search.hpp"
#include "robbins/core.hpp"
#include "robbins/errors.hpp"
#include "robbins/exact_dp.hpp"
#include "robbins/memoryless.hpp"
#include "robbins/namur.hpp"
#include "robbins/poisson_ode.hpp"

namespace py = pybind11;
using namespace robbins;

namespace {


namur::ObjectiveHypothesis objective_of(const std::string& text) {
  const auto o = namur::parse_objective(text);
  if (!o) throw InvalidArgument("unknown objective '" + text + "'");
  return *o;
}

}  // namespace

PYBIND11_MODULE(_robbins, m) {
  m.doc() = "Robbins' problem laboratory";
  static py::exception<ResourceBound> resource_bound(m, "ResourceBound", PyExc_RuntimeError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError",
                                                       PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ResourceBound& e) {
      resource_bound(e.what());
    } catch (const NumericalError& e) {
      numerical_error(e.what());
    }
  });

  m.attr("RNG_ALGORITHM") = std::string(kRngAlgorithm);

  // Exact values.
  m.def(
      "optimal_value",
      [](std::size_t n, double tol) {
        const auto v = optimal_value(n, tol);
        py::dict d;
        d["n"] = v.n;
        d["value"] = v.value;
        d["method"] = to_string(v.method);
        d["error_bound"] = v.error_bound;
        return d;
      },
      py::arg("n"), py::arg("tol") = 1e-4);
  m.def("secretary_success", &secretary_success, py::arg("n"), py::arg("cutoff"));
  m.def(
      "secretary_rule",
      [](std::size_t n) {
        const auto r = secretary_rule(n);
        return py::make_tuple(r.cutoff, r.success_prob);
      },
      py::arg("n"));
  m.def(
      "truncated_value", [](std::size_t n, std::size_t level) {
        return truncated_value(n, level).value;
      },
      py::arg("n"), py::arg("level"));

  // Memoryless rules.
  m.def(
      "phi_family",
      [](double c, std::size_t n) {
        const auto tv = phi_family(c, n);
        return std::vector<double>(tv.values().begin(), tv.values().end());
      },
      py::arg("c"), py::arg("n"));
  m.def(
      "expected_rank",
      [](std::vector<double> phi) { return expected_rank_exact(ThresholdVector(std::move(phi))); },
      py::arg("phi"));
  m.def(
      "optimize_c",
      [](std::size_t n) {
        const auto r = optimize_c(n);
        return py::make_tuple(r.c_star, r.value);
      },
      py::arg("n"));
  m.def(
      "optimize_free",
      [](std::size_t n) {
        const auto r = optimize_free(n);
        const auto v = r.phi.values();
        return py::make_tuple(std::vector<double>(v.begin(), v.end()), r.value);
      },
      py::arg("n"));
  m.def(
      "evaluate_threshold",
      [](std::vector<double> phi, std::uint64_t replications, std::uint64_t seed) {
        const std::size_t n = phi.size();
        py::gil_scoped_release release;
        const auto r = evaluate_policy(ThresholdPolicy(ThresholdVector(std::move(phi))), n,
                                       replications, seed);
        return MeanSe{r.mean_rank, r.std_error};
      },
      py::arg("phi"), py::arg("replications"), py::arg("seed") = 0);
  m.def(
      "correlation_check",
      [](std::size_t n, std::uint64_t replications, std::size_t k, std::uint64_t seed) {
        CorrelationReport r;
        {
          py::gil_scoped_release release;
          r = correlation_check(n, replications, k == 0 ? n : k, seed);
        }
        return py::make_tuple(r.correlation, r.std_error);
      },
      py::arg("n"), py::arg("replications"), py::arg("k") = 0, py::arg("seed") = 0);

  py::class_<MeanSe>(m, "MeanSe")
      .def_readonly("mean", &MeanSe::mean)
      .def_readonly("se", &MeanSe::se)
      .def("__repr__", [](const MeanSe& s) {
        return "MeanSe(mean=" + std::to_string(s.mean) + ", se=" + std::to_string(s.se) + ")";
      });

  // Cloud search.
  m.def(
      "cloud_batch",
      [](double base_c, double d_pc, int theta_pre, double p_pc, int theta_post,
         double accept_margin, std::size_t n, std::uint64_t batch, std::uint64_t seed) {
        CloudPolicy p;
        p.base_c = base_c;
        p.d_pc = d_pc;
        p.theta_pre = theta_pre;
        p.p_pc = p_pc;
        p.theta_post = theta_post;
        p.accept_margin = accept_margin;
        validate(p);
        py::gil_scoped_release release;
        return evaluate_batch(p, n, batch, seed);
      },
      py::arg("base_c") = kMemorylessReferenceC, py::arg("d_pc") = 0.0,
      py::arg("theta_pre") = 0, py::arg("p_pc") = 0.0, py::arg("theta_post") = 0,
      py::arg("accept_margin") = 0.0, py::arg("n") = 10000, py::arg("batch") = 20000,
      py::arg("seed") = 0);

  // Poisson embedding.
  m.def(
      "value_W",
      [](double c, double t) {
        return value_W(ContinuousThreshold(c, t), default_penalty()).value;
      },
      py::arg("c"), py::arg("t"));
  m.def(
      "simulate_threshold_play",
      [](double c, double t, std::uint64_t replications, std::uint64_t seed) {
        py::gil_scoped_release release;
        return simulate_threshold_play(ContinuousThreshold(c, t), default_penalty(),
                                       replications, seed);
      },
      py::arg("c"), py::arg("t"), py::arg("replications"), py::arg("seed") = 0);
  m.def(
      "ode_limit",
      [](double kappa, double t_max) {
        OdeProblem p;
        p.h = std::make_shared<ConstantH>(kappa);
        p.t_max = t_max;
        return ode_solve(p).limit_estimate;
      },
      py::arg("kappa") = 0.0, py::arg("t_max") = 1000.0);

  // Namur game.
  m.def(
      "fit_distribution",
      [](std::vector<double> arrivals, const std::string& basket_json) {
        const auto basket = basket_json.empty()
                                ? namur::default_basket()
                                : namur::basket_from_json(nlohmann::json::parse(basket_json));
        return namur::fit_distribution(arrivals, basket);
      },
      py::arg("arrivals"), py::arg("basket_json") = "");
  m.def(
      "machine_game",
      [](std::size_t m_bound, std::uint64_t seed, const std::string& objective) {
        const auto s = namur::new_session(m_bound, namur::default_basket(), seed);
        const auto o = namur::machine_play(s, objective_of(objective));
        py::dict d;
        d["final_rank"] = o.final_rank;
        d["n"] = o.n;
        d["accepted_index"] = o.accepted_index;
        d["forced"] = o.forced;
        return d;
      },
      py::arg("m"), py::arg("seed"), py::arg("objective") = "EXACT_RANK(1)");
  m.def(
      "play_record",
      [](std::size_t m_bound, std::uint64_t seed, const std::vector<std::string>& decisions) {
        auto s = namur::new_session(m_bound, namur::default_basket(), seed);
        for (const auto& d : decisions) {
          if (s.closed() || !s.advance()) break;
          if (d != "ACCEPT" && d != "PASS") throw InvalidArgument("decision must be ACCEPT or PASS");
          s.decide(d == "ACCEPT" ? Decision::kAccept : Decision::kPass);
        }
        while (!s.closed() && s.advance()) s.decide(Decision::kPass);
        return s.record().dump();
      },
      py::arg("m"), py::arg("seed"), py::arg("decisions") = std::vector<std::string>{});
}
