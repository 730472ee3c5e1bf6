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

#include "robbins/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "robbins/errors.hpp"

namespace robbins {
namespace {

constexpr std::uint8_t kValueStream = 0;
constexpr std::uint8_t kArrivalStream = 1;
constexpr std::uint8_t kTailStream = 2;

// Number of entries of `values` that rank strictly below values[idx] under
// index tie-breaking.
std::size_t count_below(std::span<const double> values, std::size_t idx) {
  const double x = values[idx];
  std::size_t below = 0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j] < x || (values[j] == x && j < idx)) ++below;
  }
  return below;
}

}  // namespace

void parallel_for(std::uint64_t count,
                  const std::function<void(std::uint64_t, std::uint64_t)>& fn) {
  if (count == 0) return;
  const std::uint64_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::uint64_t workers = std::min<std::uint64_t>(hw, count);
  if (workers == 1) {
    fn(0, count);
    return;
  }
  const std::uint64_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t begin = w * chunk;
    const std::uint64_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

MeanSe mean_and_se(std::span<const double> xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

GameInstance sample_instance(std::size_t n, StreamId seed, bool timed,
                             double horizon) {
  if (n == 0) throw InvalidArgument("sample_instance: n must be >= 1");
  if (timed && !(horizon > 0.0)) {
    throw InvalidArgument("sample_instance: horizon must be positive");
  }
  GameInstance inst;
  inst.seed = seed;
  inst.values.resize(n);
  Philox4x32 values_rng(StreamId{seed.seed, (seed.stream << 8) | kValueStream});
  for (auto& v : inst.values) v = values_rng.uniform();
  if (timed) {
    Philox4x32 times_rng(
        StreamId{seed.seed, (seed.stream << 8) | kArrivalStream});
    std::vector<double> times(n);
    for (auto& t : times) t = times_rng.uniform() * horizon;
    std::sort(times.begin(), times.end());
    // Equal draws are possible in floating point; keep strictly increasing.
    for (std::size_t i = 1; i < n; ++i) {
      if (times[i] <= times[i - 1]) times[i] = std::nextafter(times[i - 1], 2.0 * horizon);
    }
    inst.arrival_times = std::move(times);
  }
  return inst;
}

RankView rank_view(std::span<const double> values) {
  const std::size_t n = values.size();
  RankView view;
  view.relative_ranks.resize(n);
  view.final_ranks.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    view.relative_ranks[k] = 1 + count_below(values.first(k + 1), k);
    view.final_ranks[k] = 1 + count_below(values, k);
  }
  return view;
}

std::size_t loss_of(const GameInstance& instance, std::size_t accepted_index) {
  if (accepted_index < 1 || accepted_index > instance.n()) {
    throw InvalidArgument("loss_of: accepted index out of range");
  }
  return 1 + count_below(instance.values, accepted_index - 1);
}

std::size_t play(const StrategyPolicy& policy, const GameInstance& instance) {
  const std::size_t n = instance.n();
  std::span<const double> values(instance.values);
  for (std::size_t k = 1; k < n; ++k) {
    if (policy.decide(k, values[k - 1], values.first(k - 1), n) ==
        Decision::kAccept) {
      return k;
    }
  }
  return n;
}

EvalReport evaluate_policy(const StrategyPolicy& policy, std::size_t n,
                           std::uint64_t replications, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("evaluate_policy: n must be >= 1");
  if (replications == 0) {
    throw InvalidArgument("evaluate_policy: replications must be >= 1");
  }
  std::vector<double> ranks(replications);
  const bool keep_history = !policy.memoryless();
  parallel_for(replications, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<double> history;
    history.reserve(keep_history ? n : 1);
    for (std::uint64_t r = begin; r < end; ++r) {
      const StreamId id = derive_stream(seed, r);
      Philox4x32 rng(StreamId{id.seed, (id.stream << 8) | kValueStream});
      history.clear();
      std::size_t k = 1;
      double x = 0.0;
      std::size_t below = 0;
      for (;; ++k) {
        x = rng.uniform();
        if (k == n ||
            policy.decide(k, x, history, n) == Decision::kAccept) {
          break;
        }
        if (keep_history) history.push_back(x);
      }
      if (keep_history) {
        for (double h : history) below += (h <= x) ? 1 : 0;
      } else {
        // Memoryless rules never saw the prefix; replay it from the stream.
        Philox4x32 replay(StreamId{id.seed, (id.stream << 8) | kValueStream});
        for (std::size_t j = 1; j < k; ++j) below += (replay.uniform() <= x) ? 1 : 0;
      }
      std::size_t later = 0;
      if (k < n) {
        Philox4x32 tail(StreamId{id.seed, (id.stream << 8) | kTailStream});
        std::binomial_distribution<std::uint64_t> binom(n - k, x);
        later = binom(tail);
      }
      ranks[r] = static_cast<double>(1 + below + later);
    }
  });
  const MeanSe ms = mean_and_se(ranks);
  return EvalReport{ms.mean, ms.se, replications, seed,
                    std::string(kRngAlgorithm)};
}

CorrelationReport correlation_check(std::size_t n, std::uint64_t replications,
                                    std::size_t k, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("correlation_check: n must be >= 2");
  if (k < 1 || k > n) throw InvalidArgument("correlation_check: k out of range");
  if (replications < 2) {
    throw InvalidArgument("correlation_check: need at least 2 replications");
  }
  struct Sums {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::uint64_t count = 0;
    void add(double x, double y) {
      sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y; ++count;
    }
    double corr() const {
      const double m = static_cast<double>(count);
      const double cov = sxy - sx * sy / m;
      const double vx = sxx - sx * sx / m;
      const double vy = syy - sy * sy / m;
      return cov / std::sqrt(vx * vy);
    }
  };
  const std::uint64_t batches =
      std::clamp<std::uint64_t>(replications / 50, 2, 100);
  std::vector<Sums> per_batch(batches);
  parallel_for(batches, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<double> values(n);
    for (std::uint64_t b = begin; b < end; ++b) {
      const std::uint64_t r0 = replications * b / batches;
      const std::uint64_t r1 = replications * (b + 1) / batches;
      for (std::uint64_t r = r0; r < r1; ++r) {
        const StreamId id = derive_stream(seed, r);
        Philox4x32 rng(StreamId{id.seed, (id.stream << 8) | kValueStream});
        for (auto& v : values) v = rng.uniform();
        const double rank = 1.0 + static_cast<double>(count_below(values, k - 1));
        per_batch[b].add(values[k - 1], rank);
      }
    }
  });
  Sums total;
  std::vector<double> batch_corr;
  batch_corr.reserve(batches);
  for (const auto& s : per_batch) {
    total.sx += s.sx; total.sy += s.sy; total.sxx += s.sxx;
    total.syy += s.syy; total.sxy += s.sxy; total.count += s.count;
    batch_corr.push_back(s.corr());
  }
  const MeanSe ms = mean_and_se(batch_corr);
  return CorrelationReport{total.corr(), ms.se, replications};
}

}  // namespace robbins
