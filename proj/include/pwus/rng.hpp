// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace pwus {

/// Pipeline stages draw from independent, labeled seed streams so that any
/// stage can be reproduced in isolation from the master seed.
enum class SeedStage : std::uint64_t {
  Phantom = 1,
  ChannelNoise = 2,
  DiffusionInit = 3,
  TrainingPatches = 4,
  SweepCell = 5,
};

namespace detail {

// splitmix64; fixed constants keep derived seeds stable across builds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derive the seed for one stage (and optional sub-index, e.g. angle or
/// sweep-cell number) from the master seed.
inline std::uint64_t stage_seed(std::uint64_t master, SeedStage stage,
                                std::uint64_t index = 0) {
  return detail::mix64(master ^ detail::mix64(static_cast<std::uint64_t>(stage) * 0x100000001b3ull + index));
}

/// Seeded Gaussian stream used everywhere randomness is needed.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace pwus
