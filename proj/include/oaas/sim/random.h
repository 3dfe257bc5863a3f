// Copyright 2026 The oaas-mini Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oaas::sim {

/// A single deterministic random stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double Uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double Exponential(double mean) {
    return mean <= 0 ? 0.0 : std::exponential_distribution<double>(1.0 / mean)(engine_);
  }
  double Normal(double mean, double stddev) {
    return stddev <= 0 ? mean : std::normal_distribution<double>(mean, stddev)(engine_);
  }
  uint64_t Next() { return engine_(); }
  /// Uniform integer in [0, n).
  uint64_t Below(uint64_t n) { return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_); }

 private:
  std::mt19937_64 engine_;
};

/// Root of all randomness in one simulation. Each (component, entity) pair
/// gets its own stream, so adding an entity never shifts another's draws.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed) : seed_(seed) {}

  uint64_t seed() const { return seed_; }
  Rng Stream(std::string_view component, uint64_t entity = 0) const;

 private:
  uint64_t seed_;
};

}  // namespace oaas::sim
