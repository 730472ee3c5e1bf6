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

#ifndef ROBBINS_NAMUR_HPP_
#define ROBBINS_NAMUR_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "robbins/core.hpp"
#include "robbins/rng.hpp"

namespace robbins::namur {

enum class Family { kUniform, kPower, kReversePower, kExponential };

// Continuous arrival-time distribution on [a, b], parameterized on the
// normalized time z = (u - a) / (b - a):
//   uniform        G = z
//   power(p)       G = z^p
//   reverse(p)     G = 1 - (1 - z)^p
//   exponential(l) G = (1 - e^{-l z}) / (1 - e^{-l})
struct ArrivalDistribution {
  std::string name;
  Family family = Family::kUniform;
  double param = 1.0;

  double cdf(double z) const;
  double pdf(double z) const;
  double quantile(double p) const;
};

struct DistributionBasket {
  double a = 0.0;
  double b = 1.0;
  std::vector<ArrivalDistribution> entries;

  void validate() const;
  double normalize(double u) const { return (u - a) / (b - a); }
  double cdf(std::size_t i, double u) const;
};

// {"a":0,"b":1,"entries":[{"name":"uniform","family":"uniform"},
//                         {"name":"ramp","family":"power","p":2}]}
DistributionBasket basket_from_json(const nlohmann::json& doc);
nlohmann::json basket_to_json(const DistributionBasket& basket);
DistributionBasket default_basket();

enum class ObjectiveKind { kExactRank, kTopPercent };

struct ObjectiveHypothesis {
  ObjectiveKind kind = ObjectiveKind::kExactRank;
  int target = 1;  // the rank r, or the percentage q
  double weight = 0.0;

  bool satisfied(std::size_t final_rank, std::size_t n) const;
  std::string label() const;
};

ObjectiveHypothesis exact_rank(int r);
ObjectiveHypothesis top_percent(int q);
std::optional<ObjectiveHypothesis> parse_objective(const std::string& text);

// argmin over the basket of int_a^{T_j} (G(u)/G(T_j) - F_emp(u))^2 du,
// with F_emp the empirical CDF of the j observed times (normalized by j).
// Ties go to the lowest index. Throws InvalidArgument without arrivals.
std::size_t fit_distribution(std::span<const double> arrivals,
                             const DistributionBasket& basket);

// Squared distance used by fit_distribution, per entry.
std::vector<double> fit_distances(std::span<const double> arrivals,
                                  const DistributionBasket& basket);

// Posterior over N in {1..M} (uniform prior) after j arrivals when the
// clock reads `now`: P(N) ∝ N!/(N-j)! (1 - G(now))^{N-j}, N >= j.
std::vector<double> n_posterior(std::size_t arrivals, double now,
                                const DistributionBasket& basket,
                                std::size_t entry, std::size_t m);

// Joint posterior over (entry, N), row-major [entry][N-1], using the
// entry densities at the observed times.
std::vector<std::vector<double>> joint_posterior(
    std::span<const double> arrivals, double now,
    const DistributionBasket& basket, std::size_t m);

// Accept-if rule for TOP_PERCENT objectives in uniform [0, 1] time:
// in time bin b, accept an arrival whose relative rank r among j seen
// satisfies r <= max(1, floor(fraction[b] * j)) and fraction[b] > 0.
struct ThresholdTable {
  ObjectiveHypothesis objective;
  std::size_t m = 0;
  std::uint64_t build_seed = 0;
  std::size_t training_sessions = 0;
  std::vector<double> fractions;
  double training_success = 0.0;

  bool accepts(double uniform_time, std::size_t relative_rank,
               std::size_t seen) const;
  nlohmann::json to_json() const;
  static ThresholdTable from_json(const nlohmann::json& doc);
};

// Coordinate search over the bin fractions maximizing simulated success
// on `training_sessions` games with uniform arrivals and N ~ U{1..M}.
ThresholdTable build_threshold_table(const ObjectiveHypothesis& objective,
                                     std::size_t m, std::uint64_t seed,
                                     std::size_t training_sessions = 3000,
                                     std::size_t bins = 8);

// Process-wide cache of tables keyed by (objective, M).
const ThresholdTable& cached_table(const ObjectiveHypothesis& objective,
                                   std::size_t m);

// What the machine has seen so far: arrival times and relative ranks.
struct PublicHistory {
  std::vector<double> times;
  std::vector<std::size_t> relative_ranks;
};

struct MachineBelief {
  std::size_t fitted_entry = 0;
  double uniform_time = 0.0;   // fitted G at the newest arrival
  std::size_t n_median = 0;    // posterior median of N
  double p_exhausted = 0.0;    // posterior mass on N == arrivals seen
};

MachineBelief infer(const PublicHistory& history,
                    const DistributionBasket& basket, std::size_t m);

// Decision on the newest arrival of `history`.
//   EXACT_RANK(1): relative best after the 1/e point of fitted time.
//   TOP_PERCENT(q) and other ranks: simulation-built threshold table.
// Forced ACCEPT once N is known to be exhausted.
Decision machine_decide(const PublicHistory& history,
                        const DistributionBasket& basket, std::size_t m,
                        const ObjectiveHypothesis& objective,
                        MachineBelief* belief_out = nullptr);

enum class Status { kOpen, kAccepted, kExhausted };
std::string to_string(Status s);

struct SessionOptions {
  std::optional<std::size_t> fixed_n;  // experiments only; default N ~ U{1..M}
  std::optional<ObjectiveHypothesis> objective;
  bool secret_objective = false;
  std::string mode = "human";  // human | machine
};

struct Arrival {
  double t = 0.0;
  std::size_t rel_rank = 0;
};

struct Outcome {
  std::size_t accepted_index = 0;  // 1-based
  std::size_t final_rank = 0;
  std::size_t n = 0;
  std::size_t true_f = 0;
  bool forced = false;
};

// Redacted state served before a session closes. Built from public fields
// only: it has no member that could carry hidden values, N or F.
struct PublicState {
  std::string id;
  std::size_t m = 0;
  std::vector<std::string> basket_names;
  double a = 0.0, b = 1.0;
  std::string mode;
  std::vector<Arrival> arrivals;
  std::vector<std::string> decisions;
  std::string status;
  std::optional<std::string> objective;  // absent while secret and open
  nlohmann::json to_json() const;
};

// One Namur game. Single writer; callers serialize access.
class Session {
 public:
  static Session create(std::string id, std::size_t m,
                        DistributionBasket basket, std::uint64_t seed,
                        SessionOptions options = {});

  // Reveals the next arrival. A still undecided newest arrival is passed
  // first; if that closes the game nothing is revealed and nullopt is
  // returned. Throws Conflict once closed.
  std::optional<Arrival> advance();
  // Decision on the newest revealed arrival. Passing the final arrival
  // closes the session with a forced acceptance of it.
  void decide(Decision d);

  bool closed() const { return status_ != Status::kOpen; }
  Status status() const { return status_; }
  const std::string& id() const { return id_; }
  std::size_t m() const { return m_; }
  const DistributionBasket& basket() const { return basket_; }
  std::uint64_t seed() const { return seed_; }
  const SessionOptions& options() const { return options_; }
  const std::optional<Outcome>& outcome() const { return outcome_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  PublicHistory public_history() const;
  const std::vector<MachineBelief>& belief_trace() const { return belief_trace_; }
  // Outcome of the machine playing the same hidden instance with the same
  // objective (EXACT_RANK(1) when none was given).
  const std::optional<Outcome>& machine_outcome() const { return machine_outcome_; }

  PublicState public_state() const;
  // Full record: {id, M, basket, seed, options, arrivals, decisions,
  // outcome, machine_outcome, belief_trace, values, arrival_times}. Throws
  // Conflict while open.
  nlohmann::json record() const;
  // Record including hidden fields regardless of status; for persistence.
  nlohmann::json internal_record() const;
  // Rebuilds a session from a record by regenerating the instance from its
  // seed and replaying the recorded decisions.
  static Session replay(const nlohmann::json& record);

  // Hidden instance, for tests and offline experiments.
  std::span<const double> hidden_times() const { return times_; }
  std::span<const double> hidden_values() const { return values_; }
  std::size_t hidden_n() const { return times_.size(); }
  std::size_t hidden_f() const { return true_f_; }

 private:
  Session() = default;
  void close(std::size_t accepted_index, bool forced);
  void run_machine();

  std::string id_;
  std::size_t m_ = 0;
  DistributionBasket basket_;
  std::uint64_t seed_ = 0;
  SessionOptions options_;
  std::size_t true_f_ = 0;
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<std::size_t> rel_ranks_;
  std::size_t revealed_ = 0;
  std::vector<Decision> decisions_;
  std::vector<MachineBelief> belief_trace_;
  Status status_ = Status::kOpen;
  std::optional<Outcome> outcome_;
  std::optional<Outcome> machine_outcome_;
};

// Largest M served by interactive sessions.
inline constexpr std::size_t kMaxSessionM = 10000;

Session new_session(std::size_t m, const DistributionBasket& basket,
                    std::uint64_t seed, SessionOptions options = {});

// Machine plays a whole game on the session's hidden instance through the
// public interface only.
Outcome machine_play(const Session& session,
                     const ObjectiveHypothesis& objective);

struct LedgerUpdate {
  std::string game_id;
  std::size_t final_rank = 0;
  std::size_t n = 0;
  std::vector<double> factors;
  std::vector<bool> compatible;
};

// Machine's belief over a player's secret objective. Each game multiplies
// every hypothesis weight by the normalized compatibility likelihood
//   w_h(r) / sum_{r'=1}^{N} w_h(r')
// where w_h is 1 for compatible outcomes and beta otherwise for
// TOP_PERCENT, and exact_decay^{|r - r0|} for EXACT_RANK(r0).
//
// The default exact_decay is the ratio P(rank 2) / P(rank 1) of outcomes
// of the 1/e rule at M = 100.
inline constexpr double kDefaultBeta = 0.5;
inline constexpr double kDefaultExactDecay = 0.4;

class CompatibilityLedger {
 public:
  explicit CompatibilityLedger(std::vector<ObjectiveHypothesis> grid,
                               double beta = kDefaultBeta,
                               double exact_decay = kDefaultExactDecay);
  static CompatibilityLedger with_default_grid(
      double beta = kDefaultBeta, double exact_decay = kDefaultExactDecay);

  const LedgerUpdate& update(const std::string& game_id,
                             std::size_t final_rank, std::size_t n);

  const std::vector<ObjectiveHypothesis>& grid() const { return grid_; }
  const std::vector<LedgerUpdate>& updates() const { return updates_; }
  double beta() const { return beta_; }
  double exact_decay() const { return exact_decay_; }
  std::size_t argmax() const;
  nlohmann::json to_json() const;

 private:
  std::vector<ObjectiveHypothesis> grid_;
  double beta_;
  double exact_decay_;
  std::vector<LedgerUpdate> updates_;
};

}  // namespace robbins::namur

#endif  // ROBBINS_NAMUR_HPP_
