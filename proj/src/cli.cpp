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

#include "robbins/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "robbins/cloud_search.hpp"
#include "robbins/core.hpp"
#include "robbins/errors.hpp"
#include "robbins/exact_dp.hpp"
#include "robbins/memoryless.hpp"
#include "robbins/namur.hpp"
#include "robbins/poisson_ode.hpp"
#include "robbins/service.hpp"

namespace robbins::cli {
namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json policy_json(const CloudPolicy& p) {
  return {{"base_c", p.base_c},
          {"d_pc", p.d_pc},
          {"theta_pre", p.theta_pre},
          {"p_pc", p.p_pc},
          {"theta_post", p.theta_post},
          {"accept_margin", p.accept_margin},
          {"rule", p.rule == CloudRule::kCount ? "count" : "left_right_difference"},
          {"delta_threshold", p.delta_threshold}};
}

Penalty penalty_from(const std::string& spec) {
  if (spec == "default") return default_penalty();
  if (spec.rfind("linear:", 0) == 0) return linear_penalty(std::stod(spec.substr(7)));
  throw InvalidArgument("penalty must be 'default' or 'linear:SLOPE'");
}

std::shared_ptr<const HModel> h_from(const std::string& spec, std::uint64_t seed,
                                     const std::string& save_to, std::ostream& err) {
  if (spec == "zero") return std::make_shared<ZeroH>();
  if (spec.rfind("const:", 0) == 0) {
    return std::make_shared<ConstantH>(std::stod(spec.substr(6)));
  }
  if (spec.rfind("table:", 0) == 0) {
    return std::make_shared<HTable>(HTable::from_json(slurp(spec.substr(6))));
  }
  if (spec.rfind("sim:", 0) == 0) {
    const auto reps = std::stoull(spec.substr(4));
    auto table = std::make_shared<HTable>(h_from_simulation(default_h_grid(), reps, seed));
    if (!save_to.empty()) {
      std::ofstream(save_to) << table->to_json();
      err << "h-table written to " << save_to << "\n";
    }
    return table;
  }
  throw InvalidArgument("--h must be zero, const:K, table:PATH or sim:REPS");
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Robbins' problem laboratory"};
  app.require_subcommand(1);
  std::function<void()> action;

  // exact
  std::size_t exact_n = 0;
  double exact_tol = 1e-4;
  auto* exact = app.add_subcommand("exact", "Optimal full-history value v_n (n <= 4)");
  exact->add_option("--n", exact_n, "Number of observations")->required();
  exact->add_option("--tol", exact_tol, "Quadrature tolerance");
  exact->callback([&] {
    action = [&] {
      const auto v = optimal_value(exact_n, exact_tol);
      out << json{{"n", v.n}, {"value", v.value}, {"method", to_string(v.method)},
                  {"error_bound", v.error_bound}, {"panels", v.panels}}
                 .dump()
          << "\n";
      err << "v_" << v.n << " = " << v.value << " (+/- " << v.error_bound << ")\n";
    };
  });

  // secretary
  std::size_t sec_n = 0;
  bool sec_sum = false;
  auto* sec = app.add_subcommand("secretary", "Classical best-choice cutoff rule");
  sec->add_option("--n", sec_n, "Number of observations")->required();
  sec->add_flag("--sum-form", sec_sum, "Use the harmonic-sum cutoff");
  sec->callback([&] {
    action = [&] {
      const auto r = sec_sum ? secretary_rule_sum_form(sec_n) : secretary_rule(sec_n);
      out << json{{"n", r.n}, {"cutoff", r.cutoff}, {"success_prob", r.success_prob},
                  {"rule", sec_sum ? "sum_form" : "argmax"}}
                 .dump()
          << "\n";
      err << "cutoff " << r.cutoff << ", success " << r.success_prob << "\n";
    };
  });

  // truncate
  std::size_t tr_n = 0, tr_level = 2;
  auto* tr = app.add_subcommand("truncate", "Truncated-loss value at level 1 or 2");
  tr->add_option("--n", tr_n, "Number of observations")->required();
  tr->add_option("--level", tr_level, "Truncation level");
  tr->callback([&] {
    action = [&] {
      const auto t = truncated_value(tr_n, tr_level);
      out << json{{"n", t.n}, {"level", t.level}, {"value", t.value},
                  {"thresholds", t.thresholds}}
                 .dump()
          << "\n";
      err << "truncated value " << t.value << "\n";
    };
  });

  // ml-opt
  std::size_t ml_n = 0;
  bool ml_family = false, ml_free = false;
  double ml_tol = 1e-5;
  auto* ml = app.add_subcommand("ml-opt", "Optimize memoryless thresholds");
  ml->add_option("--n", ml_n, "Number of observations")->required();
  auto* fam = ml->add_flag("--family", ml_family, "Optimize the c-family");
  auto* fre = ml->add_flag("--free", ml_free, "Optimize every threshold");
  fam->excludes(fre);
  ml->add_option("--tol", ml_tol, "Tolerance on c");
  ml->callback([&] {
    action = [&] {
      if (ml_free) {
        const auto r = optimize_free(ml_n);
        const auto phi = r.phi.values();
        out << json{{"mode", "free"}, {"n", ml_n}, {"value", r.value},
                    {"phi", std::vector<double>(phi.begin(), phi.end())},
                    {"sweeps", r.sweeps}, {"converged", r.converged}}
                   .dump()
            << "\n";
        err << "free optimum " << r.value << " after " << r.sweeps << " sweeps\n";
      } else {
        const auto r = optimize_c(ml_n, 1.0 + 1e-9, 4.0, ml_tol);
        out << json{{"mode", "family"}, {"n", ml_n}, {"c_star", r.c_star},
                    {"value", r.value}, {"tolerance", r.tolerance},
                    {"non_unimodal", r.non_unimodal}}
                   .dump()
            << "\n";
        err << "c* = " << r.c_star << ", expected rank " << r.value << "\n";
      }
    };
  });

  // cloud-search
  SearchConfig sc;
  std::string audit_path;
  auto* cs = app.add_subcommand("cloud-search", "Winner's-rule search over cloud policies");
  cs->add_option("--n", sc.n, "Number of observations");
  cs->add_option("--batch", sc.batch, "Instances per round");
  cs->add_option("--rounds", sc.rounds, "Rounds");
  cs->add_option("--seed", sc.seed, "Master seed");
  cs->add_flag("--single-run", sc.single_run, "One instance per round");
  cs->add_option("--reference-u", sc.reference_u, "Value a round must beat");
  cs->add_option("--start-c", sc.start.base_c, "Starting base c");
  cs->add_option("--start-d", sc.start.d_pc, "Starting dissuasion width");
  cs->add_option("--start-theta-pre", sc.start.theta_pre, "Starting dissuasion count");
  cs->add_option("--start-p", sc.start.p_pc, "Starting persuasion width");
  cs->add_option("--start-theta-post", sc.start.theta_post, "Starting persuasion count");
  cs->add_option("--start-margin", sc.start.accept_margin, "Starting acceptance margin");
  cs->add_option("--scale-c", sc.scales.base_c, "Step for base c");
  cs->add_option("--scale-d", sc.scales.d_pc, "Relative step for d");
  cs->add_option("--scale-theta-pre", sc.scales.theta_pre, "Step for theta_pre");
  cs->add_option("--scale-p", sc.scales.p_pc, "Relative step for p");
  cs->add_option("--scale-theta-post", sc.scales.theta_post, "Step for theta_post");
  cs->add_option("--scale-margin", sc.scales.accept_margin, "Relative step for the margin");
  cs->add_option("--audit", audit_path, "Write round records here instead of stdout");
  cs->callback([&] {
    action = [&] {
      std::ofstream audit_file;
      std::ostream* audit = &out;
      if (!audit_path.empty()) {
        audit_file.open(audit_path);
        if (!audit_file) throw InvalidArgument("cannot write " + audit_path);
        audit = &audit_file;
      }
      const auto state = winner_rule_search(sc, {}, [&](const SearchRecord& r) {
        *audit << json{{"round", r.round}, {"policy", policy_json(r.policy)},
                       {"mean", r.mean}, {"se", r.se}, {"action", to_string(r.action)}}
                      .dump()
               << "\n";
      });
      out << json{{"summary", true}, {"best", policy_json(state.best)},
                  {"best_value", state.best_value}, {"baseline_u", state.baseline_u},
                  {"rounds", state.history.size()}, {"seed", sc.seed},
                  {"rng", std::string(kRngAlgorithm)}}
                 .dump()
          << "\n";
      err << "best round mean " << state.best_value << " vs U = " << state.baseline_u
          << "\n";
    };
  });

  // ode
  std::string ode_h = "zero", ode_save, ode_penalty = "default";
  OdeProblem ode;
  std::uint64_t ode_seed = 1;
  bool ode_trajectory = false;
  auto* od = app.add_subcommand("ode", "Integrate the Poisson-embedded ODE");
  od->set_help_flag("--help", "Print this help message and exit");
  od->add_option("--h", ode_h, "zero | const:K | table:PATH | sim:REPS");
  od->add_option("--tmax", ode.t_max, "Horizon");
  od->add_option("--rtol", ode.rel_tol, "Relative tolerance");
  od->add_option("--atol", ode.abs_tol, "Absolute tolerance");
  od->add_option("--penalty", ode_penalty, "default | linear:SLOPE");
  od->add_option("--seed", ode_seed, "Seed for sim:REPS");
  od->add_option("--save-table", ode_save, "Save a simulated h-table");
  od->add_flag("--trajectory", ode_trajectory, "Include the trajectory");
  od->callback([&] {
    action = [&] {
      ode.penalty = penalty_from(ode_penalty);
      ode.h = h_from(ode_h, ode_seed, ode_save, err);
      const auto sol = ode_solve(ode);
      json j = {{"h", ode.h->describe()}, {"t_max", ode.t_max},
                {"limit", sol.limit_estimate}, {"error_estimate", sol.error_estimate},
                {"accepted_steps", sol.accepted_steps},
                {"rejected_steps", sol.rejected_steps},
                {"final_w", sol.trajectory.empty() ? 0.0 : sol.trajectory.back().second}};
      if (ode_trajectory) j["trajectory"] = sol.trajectory;
      out << j.dump() << "\n";
      err << "w(t) tail mean " << sol.limit_estimate << "\n";
    };
  });

  // poisson-w
  double pw_c = 2.0, pw_t = 5.0;
  std::string pw_penalty = "default";
  std::uint64_t pw_mc = 0, pw_seed = 1;
  auto* pw = app.add_subcommand("poisson-w", "Value of threshold play in the Poisson model");
  pw->add_option("--c", pw_c, "Threshold constant");
  pw->add_option("--t", pw_t, "Horizon");
  pw->add_option("--penalty", pw_penalty, "default | linear:SLOPE");
  pw->add_option("--mc", pw_mc, "Monte Carlo replications for a cross-check");
  pw->add_option("--seed", pw_seed, "Seed for --mc");
  pw->callback([&] {
    action = [&] {
      const ContinuousThreshold ct(pw_c, pw_t);
      const auto pen = penalty_from(pw_penalty);
      const auto w = value_W(ct, pen);
      json j = {{"c", pw_c}, {"t", pw_t}, {"W", w.value},
                {"error_estimate", w.error_estimate}, {"penalty", pen.name}};
      if (pw_mc > 0) {
        const auto mc = simulate_threshold_play(ct, pen, pw_mc, pw_seed);
        j["mc_mean"] = mc.mean;
        j["mc_se"] = mc.se;
        j["seed"] = pw_seed;
        j["rng"] = std::string(kRngAlgorithm);
      }
      out << j.dump() << "\n";
      err << "W = " << w.value << "\n";
    };
  });

  // correlate
  std::size_t co_n = 0, co_k = 0;
  std::uint64_t co_reps = 1000000, co_seed = 1;
  auto* co = app.add_subcommand("correlate", "Monte Carlo corr(X_k, R_k)");
  co->add_option("--n", co_n, "Number of observations")->required();
  co->add_option("--k", co_k, "Index (default n)");
  co->add_option("--reps", co_reps, "Replications");
  co->add_option("--seed", co_seed, "Master seed");
  co->callback([&] {
    action = [&] {
      const std::size_t k = co_k == 0 ? co_n : co_k;
      const auto r = correlation_check(co_n, co_reps, k, co_seed);
      const double nd = static_cast<double>(co_n);
      out << json{{"n", co_n}, {"k", k}, {"correlation", r.correlation},
                  {"std_error", r.std_error}, {"replications", r.replications},
                  {"reference", std::sqrt((nd - 1.0) / (nd + 1.0))}, {"seed", co_seed},
                  {"rng", std::string(kRngAlgorithm)}}
                 .dump()
          << "\n";
      err << "corr = " << r.correlation << " +/- " << r.std_error << "\n";
    };
  });

  // play
  std::size_t pl_m = 100;
  std::uint64_t pl_seed = 1;
  std::string pl_basket, pl_objective;
  auto* pl = app.add_subcommand("play", "Play one Namur game in the terminal");
  pl->add_option("--m", pl_m, "Upper bound M on the hidden N");
  pl->add_option("--seed", pl_seed, "Game seed");
  pl->add_option("--basket", pl_basket, "Basket definition file");
  pl->add_option("--objective", pl_objective, "EXACT_RANK(r) or TOP_PERCENT(q)");
  pl->callback([&] {
    action = [&] {
      namur::SessionOptions opts;
      if (!pl_objective.empty()) {
        opts.objective = namur::parse_objective(pl_objective);
        if (!opts.objective) throw InvalidArgument("bad objective " + pl_objective);
      }
      const auto basket = pl_basket.empty() ? namur::default_basket()
                                            : namur::basket_from_json(json::parse(slurp(pl_basket)));
      auto s = namur::Session::create("local", pl_m, basket, pl_seed, opts);
      err << "arrivals on [" << basket.a << ", " << basket.b << "], N <= " << pl_m
          << "; answer a (accept) or p (pass)\n";
      while (!s.closed()) {
        const auto a = s.advance();
        if (!a) break;
        err << "t = " << a->t << "  relative rank " << a->rel_rank << "  > " << std::flush;
        std::string line;
        if (!std::getline(in, line)) line = "p";
        const bool accept = !line.empty() && (line[0] == 'a' || line[0] == 'A');
        s.decide(accept ? Decision::kAccept : Decision::kPass);
      }
      const auto& o = *s.outcome();
      err << "final rank " << o.final_rank << " of N = " << o.n << "; machine got "
          << s.machine_outcome()->final_rank << "\n";
      out << s.record().dump() << "\n";
    };
  });

  // serve
  std::string sv_config;
  int sv_port = -1;
  auto* sv = app.add_subcommand("serve", "Host the Namur game over HTTP");
  sv->add_option("--config", sv_config, "Service config file");
  sv->add_option("--port", sv_port, "Override the configured port");
  sv->callback([&] {
    action = [&] {
      auto cfg = sv_config.empty() ? service::ServiceConfig{} : service::load_config(sv_config);
      if (sv_port >= 0) cfg.port = sv_port;
      const int rc = service::serve(cfg);
      if (rc != 0) throw std::runtime_error("server failed");
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, err, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, err, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }
  try {
    action();
    return kExitOk;
  } catch (const ResourceBound& e) {
    out << json{{"error", "resource_bound"}, {"message", e.what()}}.dump() << "\n";
    err << "refused: " << e.what() << "\n";
    return kExitResourceBound;
  } catch (const InvalidArgument& e) {
    out << json{{"error", "invalid_argument"}, {"message", e.what()}}.dump() << "\n";
    err << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    out << json{{"error", "failure"}, {"message", e.what()}}.dump() << "\n";
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace robbins::cli
