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

#ifndef ROBBINS_RNG_HPP_
#define ROBBINS_RNG_HPP_

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace robbins {

// Identifies one reproducible random stream: a 64-bit master seed plus a
// 64-bit stream index. Replication r of an experiment always draws from
// stream `r`, so results never depend on scheduling.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

// Name recorded in every report that consumed random numbers.
inline constexpr std::string_view kRngAlgorithm = "philox4x32-10";

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// Key = master seed, counter = (block index, stream index). Satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32() : Philox4x32(StreamId{}) {}
  explicit Philox4x32(StreamId id) : id_(id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (lane_ == 4) {
      buffer_ = block(block_++);
      lane_ = 0;
    }
    return buffer_[lane_++];
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

  // Jump to an absolute position in the stream (in 4-word blocks).
  void seek(std::uint64_t block_index) {
    block_ = block_index;
    lane_ = 4;
  }

  StreamId id() const { return id_; }

  // Raw bijection: one 128-bit output block for a given counter.
  std::array<std::uint32_t, 4> block(std::uint64_t index) const {
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(index),
        static_cast<std::uint32_t>(index >> 32),
        static_cast<std::uint32_t>(id_.stream),
        static_cast<std::uint32_t>(id_.stream >> 32)};
    std::uint32_t k0 = static_cast<std::uint32_t>(id_.seed);
    std::uint32_t k1 = static_cast<std::uint32_t>(id_.seed >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
             static_cast<std::uint32_t>(p0)};
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  StreamId id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int lane_ = 4;
};

// Stream for replication `replication` of purpose `purpose` under `seed`.
// Purposes keep e.g. instance values and auxiliary draws independent.
inline StreamId derive_stream(std::uint64_t seed, std::uint64_t replication,
                              std::uint8_t purpose = 0) {
  return StreamId{seed, (replication << 8) | purpose};
}

// SplitMix64 finalizer; used to turn structured ids into fresh seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace robbins

#endif  // ROBBINS_RNG_HPP_
