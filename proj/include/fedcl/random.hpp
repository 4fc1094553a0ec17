// Copyright 2026 The FedCL Authors. All Rights Reserved.
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

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <vector>

namespace fedcl {

using Seed = std::uint64_t;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a position in the experiment. Every stochastic step derives
/// its own seed from the master seed and its coordinates, so the value a step
/// sees never depends on execution order.
inline Seed derive_seed(Seed master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream tags used with derive_seed, so unrelated streams never collide.
namespace stream {
inline constexpr std::uint64_t kInit = 0x1001;
inline constexpr std::uint64_t kShard = 0x1002;
inline constexpr std::uint64_t kConsolidate = 0x1003;
inline constexpr std::uint64_t kParticipation = 0x1004;
inline constexpr std::uint64_t kData = 0x1005;
inline constexpr std::uint64_t kSplit = 0x1006;
inline constexpr std::uint64_t kSmote = 0x1007;
inline constexpr std::uint64_t kRun = 0x1008;
inline constexpr std::uint64_t kCompose = 0x1009;
inline constexpr std::uint64_t kShuffle = 0x100a;
}  // namespace stream

/// Seeded random source. Thin wrapper over mt19937_64 so call sites read as
/// intent rather than distribution plumbing.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p.begin(), p.end());
    return p;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedcl
