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

#include "robbins/namur.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <regex>
#include <tuple>

#include "robbins/errors.hpp"

namespace robbins::namur {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kTableSeed = 0x4E414D5552ull;

Family family_from_string(const std::string& s) {
  if (s == "uniform") return Family::kUniform;
  if (s == "power") return Family::kPower;
  if (s == "reverse_power") return Family::kReversePower;
  if (s == "exponential") return Family::kExponential;
  throw InvalidArgument("basket: unknown family '" + s + "'");
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::kUniform: return "uniform";
    case Family::kPower: return "power";
    case Family::kReversePower: return "reverse_power";
    case Family::kExponential: return "exponential";
  }
  return "uniform";
}

const char* param_key(Family f) {
  return f == Family::kExponential ? "rate" : "p";
}

// Fenwick tree over value order; yields relative and final ranks in
// O(n log n) with index tie-breaking (an earlier equal value ranks lower).
void ranks_of(std::span<const double> values, std::vector<std::size_t>& rel,
              std::vector<std::size_t>& fin) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return values[i] < values[j];
  });
  std::vector<std::size_t> pos(n);
  for (std::size_t r = 0; r < n; ++r) pos[order[r]] = r;
  std::vector<std::size_t> tree(n + 1, 0);
  rel.assign(n, 0);
  fin.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t below = 0;
    for (std::size_t i = pos[k]; i > 0; i -= i & (~i + 1)) below += tree[i];
    rel[k] = below + 1;
    fin[k] = pos[k] + 1;
    for (std::size_t i = pos[k] + 1; i <= n; i += i & (~i + 1)) ++tree[i];
  }
}

std::size_t ceil_percent(int q, std::size_t n) {
  return (static_cast<std::size_t>(q) * n + 99) / 100;
}

// One simulated training game for table construction.
struct TrainingGame {
  std::vector<double> times;  // uniform [0, 1] time
  std::vector<std::size_t> rel;
  std::vector<std::size_t> fin;
};

double table_success(const ThresholdTable& table,
                     const std::vector<TrainingGame>& games) {
  std::size_t wins = 0;
  for (const auto& g : games) {
    const std::size_t n = g.times.size();
    std::size_t pick = n;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (table.accepts(g.times[k], g.rel[k], k + 1)) {
        pick = k + 1;
        break;
      }
    }
    if (table.objective.satisfied(g.fin[pick - 1], n)) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(games.size());
}

// Antiderivatives of G and G^2 in normalized time.
double primitive1(const ArrivalDistribution& d, double z) {
  switch (d.family) {
    case Family::kUniform: return 0.5 * z * z;
    case Family::kPower: return std::pow(z, d.param + 1.0) / (d.param + 1.0);
    case Family::kReversePower:
      return z + std::pow(1.0 - z, d.param + 1.0) / (d.param + 1.0);
    case Family::kExponential: {
      const double den = -std::expm1(-d.param);
      return (z + std::exp(-d.param * z) / d.param) / den;
    }
  }
  return 0.0;
}

double primitive2(const ArrivalDistribution& d, double z) {
  switch (d.family) {
    case Family::kUniform: return z * z * z / 3.0;
    case Family::kPower:
      return std::pow(z, 2.0 * d.param + 1.0) / (2.0 * d.param + 1.0);
    case Family::kReversePower: {
      const double w = 1.0 - z;
      return z + 2.0 * std::pow(w, d.param + 1.0) / (d.param + 1.0) -
             std::pow(w, 2.0 * d.param + 1.0) / (2.0 * d.param + 1.0);
    }
    case Family::kExponential: {
      const double den = -std::expm1(-d.param);
      const double e = std::exp(-d.param * z);
      return (z + 2.0 * e / d.param - e * e / (2.0 * d.param)) / (den * den);
    }
  }
  return 0.0;
}

}  // namespace

// Running form of the fit distance for arrivals fed in time order:
//   D = [P2(zT) - P2(0)] / G(zT)^2 - 2 S1 / (G(zT) j) + S2 / j^2
// with S1 = sum_i i [P1(z_{i+1}) - P1(z_i)] and S2 = sum_i i^2 (z_{i+1} - z_i).
class FitAccumulator {
 public:
  explicit FitAccumulator(const DistributionBasket& basket)
      : basket_(basket), s1_(basket.entries.size(), 0.0) {}

  void add(double t) {
    const double z = std::clamp(basket_.normalize(t), 0.0, 1.0);
    if (count_ > 0) {
      const double level = static_cast<double>(count_);
      for (std::size_t e = 0; e < s1_.size(); ++e) {
        const auto& d = basket_.entries[e];
        s1_[e] += level * (primitive1(d, z) - primitive1(d, last_));
      }
      s2_ += level * level * (z - last_);
    }
    last_ = std::max(last_, z);
    ++count_;
  }

  std::size_t count() const { return count_; }

  std::vector<double> distances() const {
    std::vector<double> out;
    out.reserve(s1_.size());
    const double j = static_cast<double>(count_);
    for (std::size_t e = 0; e < s1_.size(); ++e) {
      const auto& d = basket_.entries[e];
      const double g = d.cdf(last_);
      if (!(g > 0.0)) {
        out.push_back(kInf);
        continue;
      }
      const double sq = primitive2(d, last_) - primitive2(d, 0.0);
      out.push_back(std::max(0.0, sq / (g * g) - 2.0 * s1_[e] / (g * j) +
                                      s2_ / (j * j)));
    }
    return out;
  }

  std::size_t best() const {
    const auto d = distances();
    return static_cast<std::size_t>(std::min_element(d.begin(), d.end()) -
                                    d.begin());
  }

 private:
  const DistributionBasket& basket_;
  std::vector<double> s1_;
  double s2_ = 0.0;
  double last_ = 0.0;
  std::size_t count_ = 0;
};

double ArrivalDistribution::cdf(double z) const {
  z = std::clamp(z, 0.0, 1.0);
  switch (family) {
    case Family::kUniform: return z;
    case Family::kPower: return std::pow(z, param);
    case Family::kReversePower: return 1.0 - std::pow(1.0 - z, param);
    case Family::kExponential:
      return std::expm1(-param * z) / std::expm1(-param);
  }
  return z;
}

double ArrivalDistribution::pdf(double z) const {
  if (z < 0.0 || z > 1.0) return 0.0;
  switch (family) {
    case Family::kUniform: return 1.0;
    case Family::kPower: return param * std::pow(z, param - 1.0);
    case Family::kReversePower: return param * std::pow(1.0 - z, param - 1.0);
    case Family::kExponential:
      return -param * std::exp(-param * z) / std::expm1(-param);
  }
  return 1.0;
}

double ArrivalDistribution::quantile(double p) const {
  p = std::clamp(p, 0.0, 1.0);
  switch (family) {
    case Family::kUniform: return p;
    case Family::kPower: return std::pow(p, 1.0 / param);
    case Family::kReversePower: return 1.0 - std::pow(1.0 - p, 1.0 / param);
    case Family::kExponential:
      return -std::log1p(p * std::expm1(-param)) / param;
  }
  return p;
}

void DistributionBasket::validate() const {
  if (entries.empty()) throw InvalidArgument("basket: no entries");
  if (!(std::isfinite(a) && std::isfinite(b) && a < b)) {
    throw InvalidArgument("basket: bounds must satisfy a < b");
  }
  for (const auto& e : entries) {
    if (!std::isfinite(e.param)) throw InvalidArgument("basket: bad parameter");
    if ((e.family == Family::kPower || e.family == Family::kReversePower) &&
        e.param <= 0.0) {
      throw InvalidArgument("basket: power exponent must be positive");
    }
    if (e.family == Family::kExponential && e.param == 0.0) {
      throw InvalidArgument("basket: exponential rate must be nonzero");
    }
  }
}

double DistributionBasket::cdf(std::size_t i, double u) const {
  return entries.at(i).cdf(normalize(u));
}

DistributionBasket basket_from_json(const nlohmann::json& doc) {
  DistributionBasket basket;
  try {
    basket.a = doc.value("a", 0.0);
    basket.b = doc.value("b", 1.0);
    for (const auto& e : doc.at("entries")) {
      ArrivalDistribution d;
      d.family = family_from_string(e.value("family", "uniform"));
      d.name = e.value("name", family_to_string(d.family));
      d.param = e.value(param_key(d.family), 1.0);
      basket.entries.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("basket: ") + ex.what());
  }
  basket.validate();
  return basket;
}

nlohmann::json basket_to_json(const DistributionBasket& basket) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : basket.entries) {
    nlohmann::json j = {{"name", e.name}, {"family", family_to_string(e.family)}};
    if (e.family != Family::kUniform) j[param_key(e.family)] = e.param;
    entries.push_back(std::move(j));
  }
  return {{"a", basket.a}, {"b", basket.b}, {"entries", std::move(entries)}};
}

DistributionBasket default_basket() {
  DistributionBasket basket;
  basket.entries = {{"uniform", Family::kUniform, 1.0},
                    {"early", Family::kReversePower, 2.0},
                    {"late", Family::kPower, 2.0}};
  return basket;
}

bool ObjectiveHypothesis::satisfied(std::size_t final_rank,
                                    std::size_t n) const {
  if (kind == ObjectiveKind::kExactRank) {
    return final_rank == static_cast<std::size_t>(target);
  }
  return final_rank <= ceil_percent(target, n);
}

std::string ObjectiveHypothesis::label() const {
  return (kind == ObjectiveKind::kExactRank ? "EXACT_RANK(" : "TOP_PERCENT(") +
         std::to_string(target) + ")";
}

ObjectiveHypothesis exact_rank(int r) {
  if (r < 1) throw InvalidArgument("EXACT_RANK needs r >= 1");
  return {ObjectiveKind::kExactRank, r, 0.0};
}

ObjectiveHypothesis top_percent(int q) {
  if (q < 1 || q > 100) throw InvalidArgument("TOP_PERCENT needs 1 <= q <= 100");
  return {ObjectiveKind::kTopPercent, q, 0.0};
}

std::optional<ObjectiveHypothesis> parse_objective(const std::string& text) {
  static const std::regex re(R"(^\s*(EXACT_RANK|TOP_PERCENT)\((\d{1,6})\)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  const int v = std::stoi(m[2].str());
  try {
    return m[1] == "EXACT_RANK" ? exact_rank(v) : top_percent(v);
  } catch (const InvalidArgument&) {
    return std::nullopt;
  }
}

std::vector<double> fit_distances(std::span<const double> arrivals,
                                  const DistributionBasket& basket) {
  if (arrivals.empty()) throw InvalidArgument("fit_distribution: no arrivals");
  basket.validate();
  std::vector<double> z(arrivals.begin(), arrivals.end());
  std::sort(z.begin(), z.end());
  FitAccumulator acc(basket);
  for (double t : z) acc.add(t);
  return acc.distances();
}

std::size_t fit_distribution(std::span<const double> arrivals,
                             const DistributionBasket& basket) {
  const auto d = fit_distances(arrivals, basket);
  return static_cast<std::size_t>(std::min_element(d.begin(), d.end()) -
                                  d.begin());
}

std::vector<double> n_posterior(std::size_t arrivals, double now,
                                const DistributionBasket& basket,
                                std::size_t entry, std::size_t m) {
  if (m < 1 || arrivals > m) {
    throw InvalidArgument("n_posterior: need 1 <= M and arrivals <= M");
  }
  const double survival = 1.0 - basket.cdf(entry, now);
  std::vector<double> post(m, 0.0);
  const std::size_t lo = std::max<std::size_t>(arrivals, 1);
  if (!(survival > 0.0)) {
    post[lo - 1] = 1.0;
    return post;
  }
  const double ls = std::log(survival);
  const double jd = static_cast<double>(arrivals);
  std::vector<double> logw(m, -kInf);
  double top = -kInf;
  for (std::size_t n = lo; n <= m; ++n) {
    const double nd = static_cast<double>(n);
    logw[n - 1] = std::lgamma(nd + 1.0) - std::lgamma(nd - jd + 1.0) +
                  (nd - jd) * ls;
    top = std::max(top, logw[n - 1]);
  }
  double sum = 0.0;
  for (std::size_t n = lo; n <= m; ++n) {
    post[n - 1] = std::exp(logw[n - 1] - top);
    sum += post[n - 1];
  }
  for (double& p : post) p /= sum;
  return post;
}

std::vector<std::vector<double>> joint_posterior(
    std::span<const double> arrivals, double now,
    const DistributionBasket& basket, std::size_t m) {
  basket.validate();
  const std::size_t k = basket.entries.size();
  std::vector<std::vector<double>> out(k);
  std::vector<double> log_evidence(k, -kInf);
  for (std::size_t e = 0; e < k; ++e) {
    double ll = 0.0;
    for (double t : arrivals) {
      const double d = basket.entries[e].pdf(basket.normalize(t));
      ll += d > 0.0 ? std::log(d) : -kInf;
    }
    // Evidence of the N part relative to the normalized posterior.
    const double survival = 1.0 - basket.cdf(e, now);
    const double jd = static_cast<double>(arrivals.size());
    double top = -kInf;
    std::vector<double> logw(m, -kInf);
    for (std::size_t n = std::max<std::size_t>(arrivals.size(), 1); n <= m; ++n) {
      const double nd = static_cast<double>(n);
      double lw = std::lgamma(nd + 1.0) - std::lgamma(nd - jd + 1.0);
      if (n > arrivals.size()) {
        lw += survival > 0.0 ? (nd - jd) * std::log(survival) : -kInf;
      }
      logw[n - 1] = lw + ll;
      top = std::max(top, logw[n - 1]);
    }
    out[e] = std::move(logw);
    log_evidence[e] = top;
  }
  const double top = *std::max_element(log_evidence.begin(), log_evidence.end());
  double sum = 0.0;
  for (auto& row : out) {
    for (double& w : row) {
      w = std::isfinite(top) && w > -kInf ? std::exp(w - top) : 0.0;
      sum += w;
    }
  }
  if (!(sum > 0.0)) throw NumericalError("joint_posterior: zero likelihood");
  for (auto& row : out) {
    for (double& w : row) w /= sum;
  }
  return out;
}

bool ThresholdTable::accepts(double uniform_time, std::size_t relative_rank,
                             std::size_t seen) const {
  const std::size_t bins = fractions.size();
  const std::size_t bin = std::min(
      bins - 1, static_cast<std::size_t>(std::max(0.0, uniform_time) *
                                         static_cast<double>(bins)));
  const double f = fractions[bin];
  if (!(f > 0.0)) return false;
  const auto cap = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(f * static_cast<double>(seen))));
  return relative_rank <= cap;
}

nlohmann::json ThresholdTable::to_json() const {
  return {{"objective", objective.label()},
          {"M", m},
          {"build_seed", build_seed},
          {"training_sessions", training_sessions},
          {"fractions", fractions},
          {"training_success", training_success}};
}

ThresholdTable ThresholdTable::from_json(const nlohmann::json& doc) {
  ThresholdTable t;
  auto obj = parse_objective(doc.at("objective").get<std::string>());
  if (!obj) throw InvalidArgument("threshold table: bad objective");
  t.objective = *obj;
  t.m = doc.at("M").get<std::size_t>();
  t.build_seed = doc.at("build_seed").get<std::uint64_t>();
  t.training_sessions = doc.at("training_sessions").get<std::size_t>();
  t.fractions = doc.at("fractions").get<std::vector<double>>();
  t.training_success = doc.value("training_success", 0.0);
  if (t.fractions.empty()) throw InvalidArgument("threshold table: no bins");
  return t;
}

ThresholdTable build_threshold_table(const ObjectiveHypothesis& objective,
                                     std::size_t m, std::uint64_t seed,
                                     std::size_t training_sessions,
                                     std::size_t bins) {
  if (m < 1 || bins < 1 || training_sessions < 1) {
    throw InvalidArgument("build_threshold_table: M, bins, sessions >= 1");
  }
  if (m > kMaxSessionM) throw ResourceBound("build_threshold_table: M too large");
  std::vector<TrainingGame> games(training_sessions);
  for (std::size_t s = 0; s < training_sessions; ++s) {
    Philox4x32 rng(derive_stream(seed, s, 0));
    const auto n = std::min<std::size_t>(
        m, 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(m)));
    auto& g = games[s];
    g.times.resize(n);
    std::vector<double> values(n);
    for (auto& t : g.times) t = rng.uniform();
    for (auto& v : values) v = rng.uniform();
    std::sort(g.times.begin(), g.times.end());
    ranks_of(values, g.rel, g.fin);
  }
  ThresholdTable table;
  table.objective = objective;
  table.m = m;
  table.build_seed = seed;
  table.training_sessions = training_sessions;
  const double start = objective.kind == ObjectiveKind::kTopPercent
                           ? objective.target / 100.0
                           : 0.0;
  table.fractions.assign(bins, start);
  double best = table_success(table, games);
  for (int sweep = 0; sweep < 4; ++sweep) {
    bool moved = false;
    for (std::size_t b = 0; b < bins; ++b) {
      for (int step = 0; step <= 20; ++step) {
        const double cand = step / 20.0;
        if (cand == table.fractions[b]) continue;
        const double keep = table.fractions[b];
        table.fractions[b] = cand;
        const double s = table_success(table, games);
        if (s > best) {
          best = s;
          moved = true;
        } else {
          table.fractions[b] = keep;
        }
      }
    }
    if (!moved) break;
  }
  table.training_success = best;
  return table;
}

const ThresholdTable& cached_table(const ObjectiveHypothesis& objective,
                                   std::size_t m) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, std::size_t>, ThresholdTable> cache;
  const auto key = std::make_tuple(static_cast<int>(objective.kind),
                                   objective.target, m);
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const std::uint64_t seed =
        mix64(kTableSeed ^ mix64(static_cast<std::uint64_t>(objective.target) * 2 +
                                 static_cast<std::uint64_t>(objective.kind)) ^
              m);
    it = cache.emplace(key, build_threshold_table(objective, m, seed)).first;
  }
  return it->second;
}

MachineBelief infer(const PublicHistory& history,
                    const DistributionBasket& basket, std::size_t m) {
  if (history.times.empty()) throw InvalidArgument("infer: no arrivals");
  MachineBelief belief;
  belief.fitted_entry =
      basket.entries.size() == 1 ? 0 : fit_distribution(history.times, basket);
  const double now = history.times.back();
  belief.uniform_time = basket.cdf(belief.fitted_entry, now);
  const auto post =
      n_posterior(history.times.size(), now, basket, belief.fitted_entry, m);
  double acc = 0.0;
  for (std::size_t n = 1; n <= m; ++n) {
    acc += post[n - 1];
    if (acc >= 0.5) {
      belief.n_median = n;
      break;
    }
  }
  if (belief.n_median == 0) belief.n_median = m;
  belief.p_exhausted = post[history.times.size() - 1];
  return belief;
}

namespace {

// Decision on the newest of j arrivals with relative rank r. `fitted_time`
// is only called when the decision depends on it.
template <typename FittedTime>
Decision decide_core(std::size_t j, std::size_t r, bool clock_at_end,
                     std::size_t m, const ObjectiveHypothesis& objective,
                     FittedTime&& fitted_time) {
  // N is known exhausted at M arrivals or once the clock reaches b.
  if (j == m || clock_at_end) return Decision::kAccept;
  if (objective.kind == ObjectiveKind::kExactRank && objective.target == 1) {
    if (r != 1) return Decision::kPass;
    return fitted_time() >= 1.0 / std::numbers::e ? Decision::kAccept
                                                  : Decision::kPass;
  }
  const auto& table = cached_table(objective, m);
  const double fmax =
      *std::max_element(table.fractions.begin(), table.fractions.end());
  if (!(fmax > 0.0)) return Decision::kPass;
  const auto cap = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fmax * static_cast<double>(j))));
  if (r > cap) return Decision::kPass;
  return table.accepts(fitted_time(), r, j) ? Decision::kAccept
                                            : Decision::kPass;
}

}  // namespace

Decision machine_decide(const PublicHistory& history,
                        const DistributionBasket& basket, std::size_t m,
                        const ObjectiveHypothesis& objective,
                        MachineBelief* belief_out) {
  const std::size_t j = history.times.size();
  if (j == 0 || history.relative_ranks.size() != j) {
    throw InvalidArgument("machine_decide: history needs one rank per arrival");
  }
  if (j > m) throw InvalidArgument("machine_decide: more arrivals than M");
  if (belief_out != nullptr) *belief_out = infer(history, basket, m);
  const double now = history.times.back();
  return decide_core(j, history.relative_ranks.back(),
                     basket.normalize(now) >= 1.0, m, objective, [&] {
                       const std::size_t e =
                           belief_out != nullptr ? belief_out->fitted_entry
                           : basket.entries.size() == 1
                               ? 0
                               : fit_distribution(history.times, basket);
                       return basket.cdf(e, now);
                     });
}

std::string to_string(Status s) {
  switch (s) {
    case Status::kOpen: return "OPEN";
    case Status::kAccepted: return "ACCEPTED";
    case Status::kExhausted: return "EXHAUSTED";
  }
  return "OPEN";
}

namespace {

std::string decision_name(Decision d) {
  return d == Decision::kAccept ? "ACCEPT" : "PASS";
}

nlohmann::json outcome_json(const Outcome& o) {
  return {{"accepted_index", o.accepted_index}, {"final_rank", o.final_rank},
          {"N", o.n}, {"true_F", o.true_f}, {"forced", o.forced}};
}

nlohmann::json belief_json(const MachineBelief& b) {
  return {{"fitted_F", b.fitted_entry}, {"uniform_time", b.uniform_time},
          {"n_median", b.n_median}, {"p_exhausted", b.p_exhausted}};
}

nlohmann::json options_json(const SessionOptions& o) {
  nlohmann::json j = {{"mode", o.mode}, {"secret_objective", o.secret_objective}};
  j["fixed_n"] = o.fixed_n ? nlohmann::json(*o.fixed_n) : nlohmann::json(nullptr);
  j["objective"] =
      o.objective ? nlohmann::json(o.objective->label()) : nlohmann::json(nullptr);
  return j;
}

SessionOptions options_from_json(const nlohmann::json& j) {
  SessionOptions o;
  o.mode = j.value("mode", "human");
  o.secret_objective = j.value("secret_objective", false);
  if (j.contains("fixed_n") && !j["fixed_n"].is_null()) {
    o.fixed_n = j["fixed_n"].get<std::size_t>();
  }
  if (j.contains("objective") && !j["objective"].is_null()) {
    o.objective = parse_objective(j["objective"].get<std::string>());
    if (!o.objective) throw InvalidArgument("record: bad objective");
  }
  return o;
}

}  // namespace

nlohmann::json PublicState::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : arrivals) arr.push_back({{"t", a.t}, {"rel_rank", a.rel_rank}});
  nlohmann::json j = {{"id", id},
                      {"M", m},
                      {"basket", basket_names},
                      {"a", this->a},
                      {"b", this->b},
                      {"mode", mode},
                      {"arrivals", std::move(arr)},
                      {"decisions", decisions},
                      {"status", status}};
  if (objective) j["objective"] = *objective;
  return j;
}

Session Session::create(std::string id, std::size_t m, DistributionBasket basket,
                        std::uint64_t seed, SessionOptions options) {
  basket.validate();
  if (m < 1) throw InvalidArgument("session: M must be >= 1");
  if (m > kMaxSessionM) throw ResourceBound("session: M above the session limit");
  if (options.fixed_n && (*options.fixed_n < 1 || *options.fixed_n > m)) {
    throw InvalidArgument("session: fixed N must lie in 1..M");
  }
  if (options.mode != "human" && options.mode != "machine") {
    throw InvalidArgument("session: mode must be human or machine");
  }
  Session s;
  s.id_ = std::move(id);
  s.m_ = m;
  s.basket_ = std::move(basket);
  s.seed_ = seed;
  s.options_ = std::move(options);
  Philox4x32 draw(derive_stream(seed, 0, 0));
  const double k = static_cast<double>(s.basket_.entries.size());
  const std::size_t n =
      s.options_.fixed_n.value_or(std::min<std::size_t>(
          m, 1 + static_cast<std::size_t>(draw.uniform() * static_cast<double>(m))));
  s.true_f_ = std::min(s.basket_.entries.size() - 1,
                       static_cast<std::size_t>(draw.uniform() * k));
  const auto& dist = s.basket_.entries[s.true_f_];
  s.times_.resize(n);
  Philox4x32 times_rng(derive_stream(seed, 0, 1));
  for (auto& t : s.times_) {
    t = s.basket_.a + (s.basket_.b - s.basket_.a) * dist.quantile(times_rng.uniform());
  }
  std::sort(s.times_.begin(), s.times_.end());
  Philox4x32 values_rng(derive_stream(seed, 0, 2));
  s.values_.resize(n);
  for (auto& v : s.values_) v = values_rng.uniform();
  std::vector<std::size_t> fin;
  ranks_of(s.values_, s.rel_ranks_, fin);
  if (s.options_.mode == "machine") {
    const auto objective = s.options_.objective.value_or(exact_rank(1));
    while (!s.closed()) {
      s.advance();
      if (s.closed()) break;
      s.decide(machine_decide(s.public_history(), s.basket_, s.m_, objective));
    }
  }
  return s;
}

PublicHistory Session::public_history() const {
  PublicHistory h;
  h.times.assign(times_.begin(), times_.begin() + static_cast<long>(revealed_));
  h.relative_ranks.assign(rel_ranks_.begin(),
                          rel_ranks_.begin() + static_cast<long>(revealed_));
  return h;
}

std::optional<Arrival> Session::advance() {
  if (closed()) throw Conflict("session " + id_ + " is closed");
  if (revealed_ > decisions_.size()) {
    decide(Decision::kPass);
    if (closed()) return std::nullopt;
  }
  ++revealed_;
  MachineBelief belief = infer(public_history(), basket_, m_);
  belief_trace_.push_back(belief);
  return Arrival{times_[revealed_ - 1], rel_ranks_[revealed_ - 1]};
}

void Session::decide(Decision d) {
  if (closed()) throw Conflict("session " + id_ + " is closed");
  if (revealed_ == 0 || decisions_.size() == revealed_) {
    throw Conflict("session " + id_ + " has no undecided arrival");
  }
  decisions_.push_back(d);
  if (d == Decision::kAccept) {
    close(revealed_, false);
  } else if (revealed_ == times_.size()) {
    close(revealed_, true);
  }
}

void Session::close(std::size_t accepted_index, bool forced) {
  std::vector<std::size_t> rel, fin;
  ranks_of(values_, rel, fin);
  outcome_ = Outcome{accepted_index, fin[accepted_index - 1], times_.size(),
                     true_f_, forced};
  status_ = forced ? Status::kExhausted : Status::kAccepted;
  run_machine();
}

void Session::run_machine() {
  machine_outcome_ = machine_play(*this, options_.objective.value_or(exact_rank(1)));
}

PublicState Session::public_state() const {
  PublicState p;
  p.id = id_;
  p.m = m_;
  for (const auto& e : basket_.entries) p.basket_names.push_back(e.name);
  p.a = basket_.a;
  p.b = basket_.b;
  p.mode = options_.mode;
  for (std::size_t i = 0; i < revealed_; ++i) {
    p.arrivals.push_back({times_[i], rel_ranks_[i]});
  }
  for (auto d : decisions_) p.decisions.push_back(decision_name(d));
  p.status = to_string(status_);
  if (options_.objective && (!options_.secret_objective || closed())) {
    p.objective = options_.objective->label();
  }
  return p;
}

nlohmann::json Session::internal_record() const {
  nlohmann::json arrivals = nlohmann::json::array();
  for (std::size_t i = 0; i < revealed_; ++i) {
    arrivals.push_back({{"t", times_[i]}, {"rel_rank", rel_ranks_[i]}});
  }
  nlohmann::json decisions = nlohmann::json::array();
  for (auto d : decisions_) decisions.push_back(decision_name(d));
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& b : belief_trace_) trace.push_back(belief_json(b));
  nlohmann::json j = {{"id", id_},
                      {"M", m_},
                      {"basket", basket_to_json(basket_)},
                      {"seed", seed_},
                      {"options", options_json(options_)},
                      {"status", to_string(status_)},
                      {"arrivals", std::move(arrivals)},
                      {"decisions", std::move(decisions)},
                      {"belief_trace", std::move(trace)},
                      {"values", values_},
                      {"arrival_times", times_}};
  j["outcome"] = outcome_ ? outcome_json(*outcome_) : nlohmann::json(nullptr);
  j["machine_outcome"] =
      machine_outcome_ ? outcome_json(*machine_outcome_) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json Session::record() const {
  if (!closed()) throw Conflict("session " + id_ + " is still open");
  return internal_record();
}

Session Session::replay(const nlohmann::json& record) {
  try {
    auto options = options_from_json(record.at("options"));
    const bool machine = options.mode == "machine";
    Session s = create(record.at("id").get<std::string>(),
                       record.at("M").get<std::size_t>(),
                       basket_from_json(record.at("basket")),
                       record.at("seed").get<std::uint64_t>(), std::move(options));
    if (machine) return s;
    for (const auto& d : record.at("decisions")) {
      const auto name = d.get<std::string>();
      if (name != "ACCEPT" && name != "PASS") {
        throw InvalidArgument("record: bad decision '" + name + "'");
      }
      if (s.revealed_ == s.decisions_.size()) s.advance();
      s.decide(name == "ACCEPT" ? Decision::kAccept : Decision::kPass);
    }
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("record: ") + ex.what());
  }
}

Session new_session(std::size_t m, const DistributionBasket& basket,
                    std::uint64_t seed, SessionOptions options) {
  return Session::create("s" + std::to_string(seed), m, basket, seed,
                         std::move(options));
}

Outcome machine_play(const Session& session,
                     const ObjectiveHypothesis& objective) {
  const auto times = session.hidden_times();
  const auto values = session.hidden_values();
  const auto& basket = session.basket();
  std::vector<std::size_t> rel, fin;
  ranks_of(values, rel, fin);
  // Same rule as machine_decide, with the fit carried across arrivals.
  FitAccumulator acc(basket);
  const std::size_t n = times.size();
  for (std::size_t k = 0; k < n; ++k) {
    acc.add(times[k]);
    const Decision d = decide_core(
        k + 1, rel[k], basket.normalize(times[k]) >= 1.0, session.m(),
        objective, [&] {
          return basket.cdf(basket.entries.size() == 1 ? 0 : acc.best(),
                            times[k]);
        });
    if (d == Decision::kAccept || k + 1 == n) {
      return Outcome{k + 1, fin[k], n, session.hidden_f(),
                     d != Decision::kAccept};
    }
  }
  throw NumericalError("machine_play: empty instance");
}

CompatibilityLedger::CompatibilityLedger(std::vector<ObjectiveHypothesis> grid,
                                         double beta, double exact_decay)
    : grid_(std::move(grid)), beta_(beta), exact_decay_(exact_decay) {
  if (grid_.empty()) throw InvalidArgument("ledger: empty hypothesis grid");
  if (!(beta_ > 0.0 && beta_ < 1.0)) throw InvalidArgument("ledger: beta in (0,1)");
  if (!(exact_decay_ > 0.0 && exact_decay_ < 1.0)) {
    throw InvalidArgument("ledger: exact_decay in (0,1)");
  }
  double sum = 0.0;
  for (const auto& h : grid_) {
    if (!(h.weight >= 0.0)) throw InvalidArgument("ledger: negative weight");
    sum += h.weight;
  }
  for (auto& h : grid_) {
    h.weight = sum > 0.0 ? h.weight / sum : 1.0 / static_cast<double>(grid_.size());
  }
}

CompatibilityLedger CompatibilityLedger::with_default_grid(double beta,
                                                           double exact_decay) {
  return CompatibilityLedger(
      {exact_rank(1), exact_rank(2), exact_rank(3), top_percent(5),
       top_percent(10), top_percent(20), top_percent(30), top_percent(50)},
      beta, exact_decay);
}

const LedgerUpdate& CompatibilityLedger::update(const std::string& game_id,
                                                std::size_t final_rank,
                                                std::size_t n) {
  if (n < 1 || final_rank < 1 || final_rank > n) {
    throw InvalidArgument("ledger: need 1 <= rank <= N");
  }
  LedgerUpdate u{game_id, final_rank, n, {}, {}};
  auto kernel = [&](const ObjectiveHypothesis& h, std::size_t r) {
    if (h.kind == ObjectiveKind::kTopPercent) return h.satisfied(r, n) ? 1.0 : beta_;
    const double d = std::abs(static_cast<double>(r) - h.target);
    return std::pow(exact_decay_, d);
  };
  double total = 0.0;
  for (auto& h : grid_) {
    double z = 0.0;
    for (std::size_t r = 1; r <= n; ++r) z += kernel(h, r);
    const double factor = kernel(h, final_rank) / z;
    u.factors.push_back(factor);
    u.compatible.push_back(h.satisfied(final_rank, n));
    h.weight *= factor;
    total += h.weight;
  }
  if (!(total > 0.0)) throw NumericalError("ledger: all weights vanished");
  for (auto& h : grid_) h.weight /= total;
  updates_.push_back(std::move(u));
  return updates_.back();
}

std::size_t CompatibilityLedger::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (grid_[i].weight > grid_[best].weight) best = i;
  }
  return best;
}

nlohmann::json CompatibilityLedger::to_json() const {
  nlohmann::json hyp = nlohmann::json::array();
  for (const auto& h : grid_) hyp.push_back({{"objective", h.label()}, {"weight", h.weight}});
  nlohmann::json ups = nlohmann::json::array();
  for (const auto& u : updates_) {
    ups.push_back({{"game", u.game_id}, {"final_rank", u.final_rank}, {"N", u.n},
                   {"factors", u.factors}, {"compatible", u.compatible}});
  }
  return {{"beta", beta_}, {"exact_decay", exact_decay_}, {"hypotheses", std::move(hyp)}, {"updates", std::move(ups)},
          {"argmax", grid_[argmax()].label()}};
}

}  // namespace robbins::namur
