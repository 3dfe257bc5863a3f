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
#include <functional>
#include <memory>

#include "oaas/common/time.h"
#include "oaas/sim/event_loop.h"
#include "oaas/sim/random.h"

namespace oaas::harness {

enum class LoadPattern { kConstantRate, kBurst, kClosedLoop };

std::string_view LoadPatternName(LoadPattern pattern);
/// Accepts constant, burst and closed (plus the full enum names). Throws ConfigError.
LoadPattern ParseLoadPattern(std::string_view name);

struct LoadSpec {
  LoadPattern pattern = LoadPattern::kConstantRate;
  /// Arrival rate of constant load, and the rate inside bursts.
  double rps = 1.0;
  /// Exponential inter-arrival gaps instead of exact 1/rps spacing.
  bool poisson = false;
  Duration idle = FromSeconds(60.0);
  Duration burst = FromSeconds(1.0);
  int clients = 1;
  Duration duration = FromSeconds(60.0);
  uint64_t seed = 1;

  /// Throws ConfigError on non-positive rates, durations or client counts.
  void Validate() const;
};

/// Issues one request; `done` must be called once it finishes (closed-loop
/// clients wait for it, open-loop patterns ignore it).
using IssueFn = std::function<void(std::function<void()> done)>;

/**
 * Injects the request stream described by a LoadSpec into the event loop,
 * starting at `start`. Arrivals are generated one event ahead, so a long run
 * never materializes its whole schedule.
 */
class LoadGenerator {
 public:
  LoadGenerator(sim::EventLoop& loop, LoadSpec spec, SimTime start, IssueFn issue);
  LoadGenerator(const LoadGenerator&) = delete;
  LoadGenerator& operator=(const LoadGenerator&) = delete;
  ~LoadGenerator();

  void Start();
  SimTime end() const { return start_ + spec_.duration; }
  uint64_t issued() const { return issued_; }
  int outstanding() const { return outstanding_; }
  int max_outstanding() const { return max_outstanding_; }

 private:
  void ScheduleOpen(uint64_t k);
  void ScheduleBurst(uint64_t cycle, uint64_t k);
  void IssueOne(bool closed);
  Duration Gap();

  sim::EventLoop& loop_;
  LoadSpec spec_;
  SimTime start_;
  IssueFn issue_;
  sim::Rng rng_;
  SimTime poisson_next_{0};
  uint64_t issued_ = 0;
  int outstanding_ = 0;
  int max_outstanding_ = 0;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace oaas::harness
